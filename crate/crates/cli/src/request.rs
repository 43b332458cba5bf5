//! Concept-discovery requests shared by the `discover` verb and the service.

use gcx_core::concepts::{DiscoveryConfig, Method, Reduction};
use gcx_core::RunArtifact;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryParams {
    pub k: Option<usize>,
    pub num_clusters: Option<usize>,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRequest {
    /// Defaults to the final convolution layer.
    #[serde(default)]
    pub layer: Option<usize>,
    pub algorithm: String,
    #[serde(default)]
    pub params: DiscoveryParams,
    /// `none` or `pca:<dims>`.
    #[serde(default)]
    pub dr: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn parse_reduction(dr: Option<&str>) -> CliResult<Reduction> {
    match dr.unwrap_or("none") {
        "none" | "raw" => Ok(Reduction::Raw),
        s => match s.strip_prefix("pca:").map(str::parse::<usize>) {
            Some(Ok(dims)) if dims >= 1 => Ok(Reduction::Pca { dims }),
            _ => Err(CliError::validation("dr", format!("expected none or pca:<dims>, got {s:?}"))),
        },
    }
}

fn positive(value: Option<usize>, field: &str) -> CliResult<usize> {
    match value {
        Some(v) if v >= 1 => Ok(v),
        Some(_) => Err(CliError::validation(field, "must be at least 1")),
        None => Err(CliError::validation(field, "is required")),
    }
}

impl ConceptRequest {
    /// Checks the request against the run and returns the layer and config.
    pub fn resolve(&self, run: &RunArtifact) -> CliResult<(usize, DiscoveryConfig)> {
        let layer = self.layer.unwrap_or(run.trace.last_conv);
        match run.manifest.layers.get(layer) {
            Some(info) if info.is_conv && info.units == gcx_core::gnn::TraceUnit::Node => {}
            Some(_) => return Err(CliError::validation("layer", format!("layer {layer} is not a convolution layer"))),
            None => return Err(CliError::validation("layer", format!("layer {layer} does not exist"))),
        }
        let p = &self.params;
        let method = match self.algorithm.as_str() {
            "kmeans" => Method::Kmeans { k: positive(p.k, "k")? },
            "ahc" | "ahc_ward" => Method::AhcWard { num_clusters: positive(p.num_clusters.or(p.k), "num_clusters")? },
            "dbscan" => {
                let eps = match p.eps {
                    Some(e) if e.is_finite() && e > 0.0 => e,
                    Some(_) => return Err(CliError::validation("eps", "must be a positive number")),
                    None => return Err(CliError::validation("eps", "is required")),
                };
                Method::Dbscan { eps, min_pts: positive(p.min_pts, "min_pts")? }
            }
            other => {
                return Err(CliError::validation(
                    "algorithm",
                    format!("expected kmeans, ahc or dbscan, got {other:?}"),
                ))
            }
        };
        let restarts = match p.restarts {
            None => 1,
            Some(r) => positive(Some(r), "restarts")?,
        };
        let config = DiscoveryConfig {
            method,
            reduction: parse_reduction(self.dr.as_deref())?,
            seed: self.seed.unwrap_or(0),
            restarts,
        };
        Ok((layer, config))
    }
}
