//! On-disk run directories: dataset, checkpoint, activation trace, concept
//! models and cached scores, tied together by a hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concepts::ConceptModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gnn::{forward, ActivationTrace, LayerKind, LayerParams, ModelConfig, TraceUnit, TrainedModel};
use crate::ingest::{export_dataset, import_dataset};
use crate::metrics::ScoreReport;

pub const ARTIFACT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRACE_FILE: &str = "trace.bin";
const CONCEPTS_DIR: &str = "concepts";
const SCORES_DIR: &str = "scores";
const TRACE_MAGIC: &[u8; 4] = b"GCXT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where the run's dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic { name: String, seed: u64 },
    Tu { dir: String, prefix: String, seed: u64 },
    File { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerInfo {
    pub index: usize,
    pub kind: LayerKind,
    pub units: TraceUnit,
    pub width: usize,
    pub is_conv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub source: DatasetSource,
    pub dataset_name: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub layers: Vec<LayerInfo>,
    /// Predicted class per classification unit.
    pub predictions: Vec<usize>,
    pub dataset: FileEntry,
    pub checkpoint: FileEntry,
    pub trace: FileEntry,
}

/// A concept model as stored, bound to the trace it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredConcepts {
    pub id: String,
    pub trace_sha256: String,
    pub model: ConceptModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredLayer {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: ModelConfig,
    params: Vec<Option<StoredLayer>>,
    train_accuracy: f64,
    test_accuracy: f64,
    initial_loss: f64,
    final_loss: f64,
}

pub fn checkpoint_json(model: &TrainedModel) -> String {
    let params = model
        .params
        .iter()
        .map(|p| {
            p.as_ref().map(|p| StoredLayer {
                rows: p.weight.nrows(),
                cols: p.weight.ncols(),
                weight: p.weight.iter().copied().collect(),
                bias: p.bias.to_vec(),
            })
        })
        .collect();
    let c = Checkpoint {
        version: ARTIFACT_VERSION,
        config: model.config.clone(),
        params,
        train_accuracy: model.train_accuracy,
        test_accuracy: model.test_accuracy,
        initial_loss: model.initial_loss,
        final_loss: model.final_loss,
    };
    serde_json::to_string_pretty(&c).expect("checkpoint serializes")
}

pub fn parse_checkpoint(json: &str) -> Result<TrainedModel> {
    check_version(json)?;
    let c: Checkpoint = serde_json::from_str(json)?;
    let params = c
        .params
        .into_iter()
        .map(|p| {
            p.map(|p| {
                if p.bias.len() != p.cols {
                    return Err(Error::format(CHECKPOINT_FILE, "bias length does not match the declared width"));
                }
                let weight = Array2::from_shape_vec((p.rows, p.cols), p.weight)
                    .map_err(|e| Error::format(CHECKPOINT_FILE, e.to_string()))?;
                Ok(LayerParams { weight, bias: Array1::from(p.bias) })
            })
            .transpose()
        })
        .collect::<Result<_>>()?;
    Ok(TrainedModel {
        config: c.config,
        params,
        train_accuracy: c.train_accuracy,
        test_accuracy: c.test_accuracy,
        initial_loss: c.initial_loss,
        final_loss: c.final_loss,
    })
}

/// Binary trace: magic, version, layer count and final conv index (u32 LE),
/// then per layer a unit byte, a conv byte, rows and cols (u64 LE) and the
/// row-major f64 LE values.
pub fn encode_trace(trace: &ActivationTrace) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&ARTIFACT_VERSION.to_le_bytes());
    out.extend_from_slice(&(trace.layers.len() as u32).to_le_bytes());
    out.extend_from_slice(&(trace.last_conv as u32).to_le_bytes());
    for (i, layer) in trace.layers.iter().enumerate() {
        out.push(match trace.units[i] {
            TraceUnit::Node => 0,
            TraceUnit::Graph => 1,
        });
        out.push(u8::from(trace.is_conv[i]));
        out.extend_from_slice(&(layer.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(layer.ncols() as u64).to_le_bytes());
        for v in layer.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(TRACE_FILE, "truncated"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::format(TRACE_FILE, "dimension overflows"))
    }
}

pub fn decode_trace(bytes: &[u8]) -> Result<ActivationTrace> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != TRACE_MAGIC {
        return Err(Error::format(TRACE_FILE, "bad magic"));
    }
    let version = r.u32()?;
    if version != ARTIFACT_VERSION {
        return Err(Error::Version { found: version, expected: ARTIFACT_VERSION });
    }
    let count = r.u32()? as usize;
    let last_conv = r.u32()? as usize;
    let (mut layers, mut units, mut is_conv) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..count {
        units.push(match r.u8()? {
            0 => TraceUnit::Node,
            1 => TraceUnit::Graph,
            b => return Err(Error::format(TRACE_FILE, format!("unknown unit byte {b}"))),
        });
        is_conv.push(r.u8()? != 0);
        let (rows, cols) = (r.u64()?, r.u64()?);
        let len = rows.checked_mul(cols).and_then(|n| n.checked_mul(8));
        let raw = r.take(len.ok_or_else(|| Error::format(TRACE_FILE, "dimension overflows"))?)?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        layers.push(Array2::from_shape_vec((rows, cols), values).expect("length checked"));
    }
    if r.at != bytes.len() {
        return Err(Error::format(TRACE_FILE, "trailing bytes"));
    }
    if count > 0 && last_conv >= count {
        return Err(Error::format(TRACE_FILE, "final conv index out of range"));
    }
    Ok(ActivationTrace { layers, units, is_conv, last_conv })
}

/// Rejects documents whose `version` field is not the current one.
fn check_version(json: &str) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    let found = value.get("version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != ARTIFACT_VERSION {
        return Err(Error::Version { found, expected: ARTIFACT_VERSION });
    }
    Ok(())
}

/// Content-derived id, so identical discovery requests share one stored model.
pub fn concept_model_id(model: &ConceptModel) -> String {
    let key = serde_json::json!({ "layer": model.layer, "config": model.config });
    sha256_hex(key.to_string().as_bytes())[..16].to_string()
}

fn score_file(id: &str, hops: usize, top_m: usize) -> String {
    format!("{id}-n{hops}-top{top_m}.json")
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn verified(dir: &Path, entry: &FileEntry) -> Result<Vec<u8>> {
    let bytes = read(&dir.join(&entry.path))?;
    let actual = sha256_hex(&bytes);
    if actual != entry.sha256 {
        return Err(Error::HashMismatch { file: entry.path.clone(), expected: entry.sha256.clone(), actual });
    }
    Ok(bytes)
}

fn write_entry(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry> {
    fs::write(dir.join(name), bytes)?;
    Ok(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub dataset: Dataset,
    pub model: TrainedModel,
    pub trace: ActivationTrace,
    pub concepts: BTreeMap<String, ConceptModel>,
    /// Keyed by score file name.
    pub scores: BTreeMap<String, ScoreReport>,
}

impl RunArtifact {
    /// Writes a fresh run directory for a trained model.
    pub fn create(
        dir: impl Into<PathBuf>,
        source: DatasetSource,
        preset: Option<String>,
        dataset: Dataset,
        model: TrainedModel,
    ) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let prediction = forward(&model, &dataset)?;
        let predictions = prediction.predicted_classes();
        let trace = prediction.trace;
        let layers = model
            .config
            .layers
            .iter()
            .enumerate()
            .map(|(index, spec)| LayerInfo {
                index,
                kind: spec.kind,
                units: trace.units[index],
                width: trace.layers[index].ncols(),
                is_conv: trace.is_conv[index],
            })
            .collect();
        let manifest = Manifest {
            version: ARTIFACT_VERSION,
            source,
            dataset_name: dataset.name.clone(),
            preset,
            seed: model.config.seed,
            class_names: dataset.class_names().to_vec(),
            train_accuracy: model.train_accuracy,
            test_accuracy: model.test_accuracy,
            initial_loss: model.initial_loss,
            final_loss: model.final_loss,
            layers,
            predictions,
            dataset: write_entry(&dir, DATASET_FILE, export_dataset(&dataset).as_bytes())?,
            checkpoint: write_entry(&dir, CHECKPOINT_FILE, checkpoint_json(&model).as_bytes())?,
            trace: write_entry(&dir, TRACE_FILE, &encode_trace(&trace))?,
        };
        let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), manifest_json)?;
        Ok(RunArtifact {
            dir,
            manifest,
            dataset,
            model,
            trace,
            concepts: BTreeMap::new(),
            scores: BTreeMap::new(),
        })
    }

    /// Loads and verifies a run directory.
    pub fn load(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest_bytes = read(&dir.join(MANIFEST_FILE))?;
        let manifest_json = String::from_utf8_lossy(&manifest_bytes);
        check_version(&manifest_json)?;
        let manifest: Manifest = serde_json::from_str(&manifest_json)?;
        let dataset = import_dataset(&String::from_utf8_lossy(&verified(&dir, &manifest.dataset)?))?;
        let model = parse_checkpoint(&String::from_utf8_lossy(&verified(&dir, &manifest.checkpoint)?))?;
        let trace = decode_trace(&verified(&dir, &manifest.trace)?)?;

        let mut concepts = BTreeMap::new();
        for path in sorted_json_files(&dir.join(CONCEPTS_DIR))? {
            let stored: StoredConcepts = serde_json::from_slice(&read(&path)?)?;
            if stored.trace_sha256 != manifest.trace.sha256 {
                return Err(Error::HashMismatch {
                    file: path.display().to_string(),
                    expected: manifest.trace.sha256.clone(),
                    actual: stored.trace_sha256,
                });
            }
            concepts.insert(stored.id, stored.model);
        }
        let mut scores = BTreeMap::new();
        for path in sorted_json_files(&dir.join(SCORES_DIR))? {
            let name = path.file_name().expect("file").to_string_lossy().into_owned();
            scores.insert(name, serde_json::from_slice(&read(&path)?)?);
        }
        Ok(RunArtifact { dir, manifest, dataset, model, trace, concepts, scores })
    }

    /// Stores a concept model (idempotent) and returns its id.
    pub fn add_concepts(&mut self, model: ConceptModel) -> Result<String> {
        if model.points.nrows() != self.dataset.total_nodes() {
            return Err(Error::input("concept model does not cover this run's nodes"));
        }
        let id = concept_model_id(&model);
        if !self.concepts.contains_key(&id) {
            let dir = self.dir.join(CONCEPTS_DIR);
            fs::create_dir_all(&dir)?;
            let stored = StoredConcepts { id: id.clone(), trace_sha256: self.manifest.trace.sha256.clone(), model };
            fs::write(dir.join(format!("{id}.json")), serde_json::to_string(&stored)?)?;
            self.concepts.insert(id.clone(), stored.model);
        }
        Ok(id)
    }

    pub fn concept_model(&self, id: &str) -> Result<&ConceptModel> {
        self.concepts.get(id).ok_or_else(|| Error::NotFound(format!("concept model {id}")))
    }

    pub fn cached_score(&self, id: &str, hops: usize, top_m: usize) -> Option<&ScoreReport> {
        self.scores.get(&score_file(id, hops, top_m))
    }

    pub fn store_score(&mut self, id: &str, report: ScoreReport) -> Result<()> {
        self.concept_model(id)?;
        let dir = self.dir.join(SCORES_DIR);
        fs::create_dir_all(&dir)?;
        let name = score_file(id, report.hops, report.top_m);
        fs::write(dir.join(&name), serde_json::to_string_pretty(&report)?)?;
        self.scores.insert(name, report);
        Ok(())
    }
}

fn sorted_json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "json"));
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{discover_concepts, DiscoveryConfig};
    use crate::gnn::{train, Preset};
    use crate::graph::Graph;
    use crate::metrics::score_concepts;

    fn toy() -> (Dataset, TrainedModel) {
        let edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)];
        let g = Graph::new(6, edges)
            .unwrap()
            .with_node_labels(vec![0, 0, 0, 1, 1, 1])
            .unwrap()
            .with_features(Array2::from_shape_fn((6, 2), |(i, j)| f64::from(u8::from((i < 3) == (j == 0)))))
            .unwrap();
        let ds = Dataset::new("toy", vec![g], crate::dataset::Task::NodeClassification, 2, vec!["a".into(), "b".into()], 3)
            .unwrap();
        let mut cfg = Preset::BaShapes.config(2, 3);
        cfg.epochs = 20;
        let model = train(&ds, &cfg).unwrap();
        (ds, model)
    }

    fn source() -> DatasetSource {
        DatasetSource::File { path: "toy.json".into() }
    }

    #[test]
    fn round_trip_with_concepts_and_scores() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, model) = toy();
        let mut run = RunArtifact::create(dir.path(), source(), Some("ba_shapes".into()), ds, model).unwrap();
        let cm = discover_concepts(&run.trace, run.trace.last_conv, &DiscoveryConfig::kmeans(2, 0)).unwrap();
        let id = run.add_concepts(cm.clone()).unwrap();
        assert_eq!(run.add_concepts(cm.clone()).unwrap(), id);
        let report = score_concepts(&cm, &run.dataset, 1, 2).unwrap();
        run.store_score(&id, report.clone()).unwrap();
        let loaded = RunArtifact::load(dir.path()).unwrap();
        assert_eq!(loaded, run);
        assert_eq!(loaded.cached_score(&id, 1, 2), Some(&report));
        assert!(matches!(loaded.concept_model("nope"), Err(Error::NotFound(_))));
    }

    #[test]
    fn trace_codec_round_trips_and_rejects_damage() {
        let (ds, model) = toy();
        let trace = forward(&model, &ds).unwrap().trace;
        let bytes = encode_trace(&trace);
        assert_eq!(decode_trace(&bytes).unwrap(), trace);
        assert!(decode_trace(&bytes[..bytes.len() - 1]).is_err());
        let mut v0 = bytes.clone();
        v0[4] = 0;
        assert!(matches!(decode_trace(&v0), Err(Error::Version { found: 0, .. })));
    }

    #[test]
    fn corrupted_checkpoint_is_a_hash_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, model) = toy();
        RunArtifact::create(dir.path(), source(), None, ds, model).unwrap();
        let path = dir.path().join(CHECKPOINT_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let i = bytes.len() / 2;
        bytes[i] = if bytes[i] == b'1' { b'2' } else { b'1' };
        fs::write(&path, bytes).unwrap();
        assert!(matches!(RunArtifact::load(dir.path()), Err(Error::HashMismatch { ref file, .. }) if file == CHECKPOINT_FILE));
    }

    #[test]
    fn old_version_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, model) = toy();
        RunArtifact::create(dir.path(), source(), None, ds, model).unwrap();
        fs::remove_file(dir.path().join(TRACE_FILE)).unwrap();
        assert!(matches!(RunArtifact::load(dir.path()), Err(Error::MissingFile(_))));

        let manifest = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest).unwrap().replace("\"version\": 1", "\"version\": 0");
        fs::write(&manifest, text).unwrap();
        assert!(matches!(RunArtifact::load(dir.path()), Err(Error::Version { found: 0, expected: 1 })));
        assert!(matches!(RunArtifact::load(dir.path().join("absent")), Err(Error::MissingFile(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let (_, model) = toy();
        assert_eq!(parse_checkpoint(&checkpoint_json(&model)).unwrap(), model);
    }
}
