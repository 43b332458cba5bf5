//! Graph convolutional networks with hand-written backpropagation.

mod adjacency;
mod config;
mod model;

pub use adjacency::normalize_adjacency;
pub use config::{Activation, LayerKind, LayerSpec, ModelConfig, Preset};
pub use model::{
    forward, gradient_check, gradient_check_with_step, init_model, loss_gradients, train, ActivationTrace,
    LayerParams, Prediction, TraceUnit, TrainedModel, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
};
