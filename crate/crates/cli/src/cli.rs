use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gcx_core::artifact::{DatasetSource, RunArtifact, ARTIFACT_VERSION, DATASET_FILE, MANIFEST_FILE};
use gcx_core::ged::{graph_edit_distance, EditCostConfig, GedResult, DEFAULT_NODE_LIMIT};
use gcx_core::gnn::{train, Preset};
use gcx_core::graph::{CanonicalGraph, Graph, Subgraph};
use gcx_core::ingest::{export_dataset, import_dataset, load_tu_dataset, write_tu_dataset, TuCorpus};
use gcx_core::synth::{build_dataset, SynthName};
use gcx_core::{Dataset, Error};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::ops;
use crate::request::{ConceptRequest, DiscoveryParams};

#[derive(Debug, Parser)]
#[command(name = "gcx", version, about = "Concept-based explanations for graph neural networks")]
pub struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Print machine-readable JSON instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,

    /// Root that relative run and dataset paths are resolved against.
    #[arg(long, global = true, env = "GCX_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import a corpus in TU text format.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        prefix: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a GCN and write a run directory.
    Train {
        /// Synthetic dataset name, or a directory written by gen or ingest.
        #[arg(long)]
        dataset: String,
        /// Architecture preset; defaults to the dataset name.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a layer's activations into concepts.
    Discover(DiscoverArgs),
    /// Completeness, purity and heuristic scores of a concept model.
    Score {
        run: PathBuf,
        #[arg(long)]
        model: Option<String>,
        /// Neighbourhood radius of concept representations.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
    /// Explain one node or one graph through its concepts.
    Explain {
        target: ExplainTarget,
        run: PathBuf,
        #[arg(long)]
        id: usize,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Exact graph edit distance between two canonical graph files.
    Ged {
        first: PathBuf,
        second: PathBuf,
        /// Charge substitutions between differently tagged nodes.
        #[arg(long)]
        tags: bool,
        #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
        node_limit: usize,
    },
    /// Serve the query API over a run directory.
    Serve {
        run: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Write a run's or dataset directory's dataset as JSON or TU text.
    Export {
        source: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Json)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
        /// File prefix for TU output; defaults to the dataset name.
        #[arg(long)]
        prefix: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    run: PathBuf,
    /// Defaults to the final convolution layer.
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long, default_value = "kmeans")]
    algorithm: String,
    #[arg(long)]
    k: Option<usize>,
    /// Cluster count for agglomerative clustering.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_pts: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Reduce to this many principal components first.
    #[arg(long)]
    pca: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainTarget {
    Node,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Json,
    Tu,
}

/// Result of one verb: a JSON document, a one-line summary and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub value: Value,
    pub text: String,
    pub status: u8,
}

impl Output {
    fn new(value: Value, text: impl Into<String>) -> Self {
        Output { value, text: text.into(), status: 0 }
    }
}

struct Paths(Option<PathBuf>);

impl Paths {
    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.0 {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::Json)?;
    fs::write(path, text).map_err(Error::Io)?;
    Ok(())
}

fn read_dataset_dir(dir: &Path) -> CliResult<Dataset> {
    let file = if dir.is_dir() { dir.join(DATASET_FILE) } else { dir.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(file.clone()),
        _ => Error::Io(e),
    })?;
    Ok(import_dataset(&text)?)
}

fn write_dataset_dir(out: &Path, dataset: &Dataset, manifest: Value) -> CliResult<()> {
    fs::create_dir_all(out).map_err(Error::Io)?;
    fs::write(out.join(DATASET_FILE), export_dataset(dataset)).map_err(Error::Io)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)
}

fn dataset_summary(d: &Dataset) -> Value {
    json!({
        "name": d.name,
        "task": d.task(),
        "graphs": d.graphs().len(),
        "nodes": d.total_nodes(),
        "edges": d.graphs().iter().map(Graph::num_edges).sum::<usize>(),
        "num_classes": d.num_classes(),
        "class_names": d.class_names(),
        "feature_dim": d.feature_dim(),
    })
}

fn read_graph(path: &Path, tags: bool) -> CliResult<Subgraph> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let c: CanonicalGraph = serde_json::from_str(&text).map_err(Error::Json)?;
    let g = Graph::from_canonical(&c)?;
    let s = Subgraph::from_edges(g.num_nodes(), g.edges().iter().copied(), [])?;
    match (tags, g.node_tags()) {
        (true, Some(t)) => Ok(s.with_tags(t.to_vec())?),
        (true, None) => Err(CliError::validation("tags", format!("{} has no node_tags", path.display()))),
        (false, _) => Ok(s),
    }
}

pub fn run(cli: Cli) -> CliResult<Output> {
    let paths = Paths(cli.data_dir.clone());
    let seed = cli.seed;
    match cli.command {
        Command::Gen { name, out } => {
            let synth: SynthName = name.parse()?;
            let d = build_dataset(synth, seed)?;
            let out = paths.resolve(&out);
            let manifest = json!({
                "version": ARTIFACT_VERSION,
                "name": synth.as_str(),
                "seed": seed,
                "spec": synth.spec(seed),
            });
            write_dataset_dir(&out, &d, manifest)?;
            let g = &d.graphs()[0];
            fs::write(out.join("graph.json"), g.to_canonical_json()).map_err(Error::Io)?;
            write_json(&out.join("labels.json"), &json!({ "class_names": d.class_names(), "node_labels": g.node_labels() }))?;
            let summary = dataset_summary(&d);
            let text = format!("{}: {} nodes, {} edges -> {}", synth, d.total_nodes(), summary["edges"], out.display());
            Ok(Output::new(summary, text))
        }
        Command::Ingest { dir, prefix, out } => {
            let corpus = TuCorpus::new(paths.resolve(&dir), prefix.clone());
            let d = load_tu_dataset(&corpus, seed)?;
            let out = paths.resolve(&out);
            let manifest = json!({
                "version": ARTIFACT_VERSION,
                "name": prefix,
                "seed": seed,
                "source": DatasetSource::Tu { dir: dir.display().to_string(), prefix: prefix.clone(), seed },
            });
            write_dataset_dir(&out, &d, manifest)?;
            let summary = dataset_summary(&d);
            let text = format!("{prefix}: {} graphs, {} classes -> {}", d.graphs().len(), d.num_classes(), out.display());
            Ok(Output::new(summary, text))
        }
        Command::Train { dataset, preset, epochs, out } => {
            let (d, source) = match dataset.parse::<SynthName>() {
                Ok(name) => (build_dataset(name, seed)?, DatasetSource::Synthetic { name: dataset.clone(), seed }),
                Err(_) => {
                    (read_dataset_dir(&paths.resolve(Path::new(&dataset)))?, DatasetSource::File { path: dataset.clone() })
                }
            };
            let preset_name = preset.unwrap_or_else(|| d.name.clone());
            let preset: Preset = preset_name.parse()?;
            let mut config = preset.config(d.num_classes(), seed);
            if let Some(e) = epochs {
                config.epochs = e;
            }
            let model = train(&d, &config)?;
            let out = paths.resolve(&out);
            let run = RunArtifact::create(&out, source, Some(preset.as_str().to_string()), d, model)?;
            let m = &run.manifest;
            let text = format!(
                "trained {} ({} epochs): train {:.3}, test {:.3} -> {}",
                preset.as_str(),
                config.epochs,
                m.train_accuracy,
                m.test_accuracy,
                out.display()
            );
            Ok(Output::new(serde_json::to_value(m).map_err(Error::Json)?, text))
        }
        Command::Discover(a) => {
            let mut run = RunArtifact::load(paths.resolve(&a.run))?;
            let request = ConceptRequest {
                layer: a.layer,
                algorithm: a.algorithm,
                params: DiscoveryParams {
                    k: a.k,
                    num_clusters: a.clusters,
                    eps: a.eps,
                    min_pts: a.min_pts,
                    restarts: a.restarts,
                },
                dr: a.pca.map(|d| format!("pca:{d}")),
                seed: Some(seed),
            };
            let s = ops::discover(&mut run, &request)?;
            let text = format!("concept model {}: {} concepts, sizes {:?}, noise {}", s.id, s.num_concepts, s.sizes, s.noise);
            Ok(Output::new(serde_json::to_value(&s).map_err(Error::Json)?, text))
        }
        Command::Score { run, model, n, top } => {
            let mut run = RunArtifact::load(paths.resolve(&run))?;
            let id = ops::pick_model(&run, model.as_deref())?.to_string();
            let r = ops::scores(&mut run, &id, n, top)?;
            let purity = r.purity.as_ref().map_or("n/a".to_string(), |p| format!("{:.3} (min {:.3}, max {:.3})", p.avg, p.min, p.max));
            let mut text = format!("model {id}: completeness {:.3}, purity {purity}", r.completeness.score);
            if let Some(h) = &r.heuristics {
                text.push_str(&format!(", heuristics {}/8", h.recovered));
            }
            Ok(Output::new(serde_json::to_value(&r).map_err(Error::Json)?, text))
        }
        Command::Explain { target, run, id, model, n, top } => {
            let run = RunArtifact::load(paths.resolve(&run))?;
            let model_id = ops::pick_model(&run, model.as_deref())?.to_string();
            let names = run.dataset.class_names();
            let (value, text) = match target {
                ExplainTarget::Node => {
                    let e = ops::node_explanation(&run, &model_id, id, n, top)?;
                    let concept = e.concept.map_or("noise".to_string(), |c| format!("concept {c}"));
                    let text = format!(
                        "node {id}: {concept}, predicted {}, actual {}",
                        names[e.predicted_class], names[e.actual_class]
                    );
                    (serde_json::to_value(&e).map_err(Error::Json)?, text)
                }
                ExplainTarget::Graph => {
                    let e = ops::graph_explanation(&run, &model_id, id, n, top)?;
                    let top: Vec<String> = e.contributions.iter().take(3).map(|c| format!("{}:{}", c.concept, c.count)).collect();
                    let text = format!(
                        "graph {id}: predicted {}, actual {}, leading concepts {}",
                        names[e.predicted_class],
                        names[e.actual_class],
                        top.join(" ")
                    );
                    (serde_json::to_value(&e).map_err(Error::Json)?, text)
                }
            };
            Ok(Output::new(json!({ "model": model_id, "class_names": names, "explanation": value }), text))
        }
        Command::Ged { first, second, tags, node_limit } => {
            let g1 = read_graph(&paths.resolve(&first), tags)?;
            let g2 = read_graph(&paths.resolve(&second), tags)?;
            let costs = if tags { EditCostConfig::default().with_tags() } else { EditCostConfig::default() };
            match graph_edit_distance(&g1, &g2, &costs, node_limit)? {
                GedResult::Distance { distance, mapping } => Ok(Output::new(
                    json!({ "status": "distance", "distance": distance, "mapping": mapping }),
                    format!("{distance}"),
                )),
                GedResult::Exceeded { limit, by } => Ok(Output {
                    value: json!({ "status": "exceeded", "limit": limit, "by": by }),
                    text: format!("exceeded: {by:?} (limit {limit})"),
                    status: CliError::Exceeded(String::new()).exit_code() as u8,
                }),
            }
        }
        Command::Serve { run, addr } => {
            let run = RunArtifact::load(paths.resolve(&run))?;
            crate::service::serve(run, &addr)?;
            Ok(Output::new(Value::Null, ""))
        }
        Command::Export { source, format, out, prefix } => {
            let source = paths.resolve(&source);
            let d = if source.join(MANIFEST_FILE).exists() && source.join(gcx_core::artifact::CHECKPOINT_FILE).exists() {
                RunArtifact::load(&source)?.dataset
            } else {
                read_dataset_dir(&source)?
            };
            let out = paths.resolve(&out);
            match format {
                ExportFormat::Json => {
                    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                        fs::create_dir_all(parent).map_err(Error::Io)?;
                    }
                    fs::write(&out, export_dataset(&d)).map_err(Error::Io)?;
                }
                ExportFormat::Tu => {
                    let prefix = prefix.unwrap_or_else(|| d.name.clone());
                    write_tu_dataset(&d, &TuCorpus::new(&out, prefix))?;
                }
            }
            Ok(Output::new(dataset_summary(&d), format!("exported {} -> {}", d.name, out.display())))
        }
    }
}
