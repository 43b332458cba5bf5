//! Shared fixtures for the benchmarks.

use gcx_core::gnn::{train, Preset};
use gcx_core::synth::{build_dataset, SynthName};
use gcx_core::{Dataset, TrainedModel};

/// A BA-Shapes dataset with a briefly trained model; enough for timing, not for accuracy.
pub fn shapes_fixture(epochs: usize) -> (Dataset, TrainedModel) {
    let dataset = build_dataset(SynthName::BaShapes, 0).expect("synthetic dataset");
    let mut config = Preset::BaShapes.config(dataset.num_classes(), 0);
    config.epochs = epochs;
    let model = train(&dataset, &config).expect("training");
    (dataset, model)
}
