use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    GraphConv { width: usize },
    GlobalMaxPool,
    Linear { width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LogSoftmax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv(width: usize) -> Self {
        LayerSpec { kind: LayerKind::GraphConv { width }, activation: Activation::Relu }
    }

    pub fn max_pool() -> Self {
        LayerSpec { kind: LayerKind::GlobalMaxPool, activation: Activation::None }
    }

    pub fn classifier(num_classes: usize) -> Self {
        LayerSpec { kind: LayerKind::Linear { width: num_classes }, activation: Activation::LogSoftmax }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, LayerKind::GraphConv { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
    pub task: Task,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Index of the last graph convolution layer.
    pub fn last_conv_layer(&self) -> Option<usize> {
        self.layers.iter().rposition(LayerSpec::is_conv)
    }

    pub fn conv_layers(&self) -> Vec<usize> {
        (0..self.layers.len()).filter(|&i| self.layers[i].is_conv()).collect()
    }

    /// Checks layer ordering and widths against `input_dim` / `num_classes`.
    ///
    /// Accepted shapes: one or more conv layers, then (graph task only) exactly one
    /// global max pool, then one or more linear layers ending in a log-softmax
    /// classifier with one unit per class.
    pub fn validate(&self, input_dim: usize, num_classes: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::input(format!("model config: {msg}")));
        if input_dim == 0 {
            return bad("input feature dimension is zero".into());
        }
        let mut seen_pool = false;
        let mut seen_linear = false;
        let mut convs = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            let last = i + 1 == self.layers.len();
            match layer.kind {
                LayerKind::GraphConv { width } => {
                    if seen_pool || seen_linear {
                        return bad(format!("conv layer {i} after pooling or linear layers"));
                    }
                    if width == 0 {
                        return bad(format!("layer {i} has zero width"));
                    }
                    convs += 1;
                }
                LayerKind::GlobalMaxPool => {
                    if self.task != Task::GraphClassification {
                        return bad("pooling is only valid for graph classification".into());
                    }
                    if seen_pool || seen_linear || convs == 0 {
                        return bad(format!("pool layer {i} must follow the last conv layer"));
                    }
                    seen_pool = true;
                }
                LayerKind::Linear { width } => {
                    if width == 0 {
                        return bad(format!("layer {i} has zero width"));
                    }
                    if self.task == Task::GraphClassification && !seen_pool {
                        return bad("graph classification needs a pool layer before linear layers".into());
                    }
                    seen_linear = true;
                }
            }
            let log_softmax = layer.activation == Activation::LogSoftmax;
            if log_softmax != last {
                return bad("log-softmax must be exactly the final activation".into());
            }
            if layer.kind == LayerKind::GlobalMaxPool && layer.activation != Activation::None {
                return bad("pool layers take no activation".into());
            }
        }
        if convs == 0 {
            return bad("at least one conv layer is required".into());
        }
        match self.layers.last().map(|l| l.kind) {
            Some(LayerKind::Linear { width }) if width == num_classes => Ok(()),
            Some(LayerKind::Linear { width }) => {
                bad(format!("classifier width {width} does not match {num_classes} classes"))
            }
            _ => bad("final layer must be a linear classifier".into()),
        }
    }

    pub fn validate_for(&self, dataset: &Dataset) -> Result<()> {
        if self.task != dataset.task() {
            return Err(Error::input("model task does not match dataset task"));
        }
        self.validate(dataset.feature_dim(), dataset.num_classes())
    }
}

/// The architectures used for each benchmark dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    BaShapes,
    BaGrid,
    BaCommunity,
    TreeCycles,
    TreeGrid,
    Mutagenicity,
    RedditBinary,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::BaShapes,
        Preset::BaGrid,
        Preset::BaCommunity,
        Preset::TreeCycles,
        Preset::TreeGrid,
        Preset::Mutagenicity,
        Preset::RedditBinary,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::BaShapes => "ba_shapes",
            Preset::BaGrid => "ba_grid",
            Preset::BaCommunity => "ba_community",
            Preset::TreeCycles => "tree_cycles",
            Preset::TreeGrid => "tree_grid",
            Preset::Mutagenicity => "mutagenicity",
            Preset::RedditBinary => "reddit_binary",
        }
    }

    /// (conv layers, width, epochs, learning rate, pooled)
    fn shape(&self) -> (usize, usize, usize, f64, bool) {
        match self {
            Preset::BaShapes | Preset::BaGrid => (3, 20, 3000, 0.001, false),
            Preset::BaCommunity => (6, 50, 6000, 0.001, false),
            Preset::TreeCycles => (3, 50, 7000, 0.001, false),
            Preset::TreeGrid => (7, 20, 10000, 0.001, false),
            Preset::Mutagenicity => (4, 30, 10000, 0.005, true),
            Preset::RedditBinary => (4, 40, 3000, 0.005, true),
        }
    }

    pub fn config(&self, num_classes: usize, seed: u64) -> ModelConfig {
        let (convs, width, epochs, learning_rate, pooled) = self.shape();
        let mut layers: Vec<LayerSpec> = (0..convs).map(|_| LayerSpec::conv(width)).collect();
        if pooled {
            layers.push(LayerSpec::max_pool());
        }
        layers.push(LayerSpec::classifier(num_classes));
        ModelConfig {
            layers,
            task: if pooled { Task::GraphClassification } else { Task::NodeClassification },
            learning_rate,
            epochs,
            seed,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown preset {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            let cfg = p.config(4, 0);
            assert!(cfg.validate(3, 4).is_ok(), "{p}");
        }
        let shapes = Preset::BaShapes.config(4, 0);
        assert_eq!(shapes.layers.len(), 4);
        assert_eq!(shapes.last_conv_layer(), Some(2));
        assert_eq!(shapes.layers[3].kind, LayerKind::Linear { width: 4 });
    }

    #[test]
    fn rejects_malformed_configs() {
        let mut cfg = Preset::BaShapes.config(4, 0);
        assert!(cfg.validate(1, 3).is_err());
        cfg.layers.insert(1, LayerSpec::max_pool());
        assert!(cfg.validate(1, 4).is_err());
        let mut no_softmax = Preset::BaShapes.config(4, 0);
        no_softmax.layers[3].activation = Activation::None;
        assert!(no_softmax.validate(1, 4).is_err());
        let mut unpooled = Preset::Mutagenicity.config(2, 0);
        unpooled.layers.retain(|l| l.kind != LayerKind::GlobalMaxPool);
        assert!(unpooled.validate(1, 2).is_err());
    }
}
