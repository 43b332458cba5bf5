pub mod artifact;
pub mod clustering;
pub mod concepts;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod ged;
pub mod gnn;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod rng;
pub mod synth;

pub use dataset::{Dataset, Task};
pub use error::{Error, Result};
pub use graph::{Graph, Subgraph};
pub use artifact::RunArtifact;
pub use concepts::{ConceptModel, DiscoveryConfig};
pub use gnn::{ActivationTrace, TrainedModel};
pub use metrics::ScoreReport;
