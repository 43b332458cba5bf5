use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adjacency::Propagation;
use super::config::{Activation, LayerKind, ModelConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Weight and bias of one conv or linear layer (`weight` is `in × out`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// A network with its learned parameters and split accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    /// One entry per layer; `None` for pooling layers.
    pub params: Vec<Option<LayerParams>>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Training loss before the first and after the last update.
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// What a row of a trace layer refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceUnit {
    Node,
    Graph,
}

/// Post-activation output of every layer from one full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layers: Vec<Array2<f64>>,
    pub units: Vec<TraceUnit>,
    pub is_conv: Vec<bool>,
    /// Index of the final neighbourhood-aggregation layer.
    pub last_conv: usize,
}

impl ActivationTrace {
    pub fn layer(&self, index: usize) -> Result<&Array2<f64>> {
        self.layers
            .get(index)
            .ok_or_else(|| Error::input(format!("layer {index} out of range ({} layers)", self.layers.len())))
    }
}

#[derive(Debug, Clone)]
pub struct Prediction {
    /// Per-unit class log-probabilities.
    pub log_probs: Array2<f64>,
    pub trace: ActivationTrace,
}

impl Prediction {
    pub fn predicted_classes(&self) -> Vec<usize> {
        argmax_rows(self.log_probs.view())
    }
}

/// Dataset flattened into the form the network consumes.
struct Batch {
    propagation: Propagation,
    features: Array2<f64>,
    /// Node ranges of each graph, for pooling (graph task only).
    segments: Vec<usize>,
    labels: Vec<usize>,
    train_mask: Vec<bool>,
}

impl Batch {
    fn new(dataset: &Dataset) -> Self {
        let graphs = dataset.graphs();
        let mut features = Array2::zeros((dataset.total_nodes(), dataset.feature_dim()));
        for (g, graph) in graphs.iter().enumerate() {
            let start = dataset.node_offsets()[g];
            features
                .slice_mut(ndarray::s![start..start + graph.num_nodes(), ..])
                .assign(graph.features());
        }
        Batch {
            propagation: Propagation::from_graphs(graphs),
            features,
            segments: dataset.node_offsets().to_vec(),
            labels: dataset.unit_labels(),
            train_mask: dataset.train_mask().to_vec(),
        }
    }

    fn num_train(&self) -> usize {
        self.train_mask.iter().filter(|&&t| t).count()
    }
}

struct LayerCache {
    /// Conv: propagated input `Â·H`; linear: the input itself.
    mixed: Option<Array2<f64>>,
    pre_activation: Option<Array2<f64>>,
    /// Pool: node index holding each graph/channel maximum.
    argmax: Option<Array2<usize>>,
    output: Array2<f64>,
}

fn forward_pass(config: &ModelConfig, params: &[Option<LayerParams>], batch: &Batch) -> Vec<LayerCache> {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(config.layers.len());
    for (i, spec) in config.layers.iter().enumerate() {
        let input: ArrayView2<f64> = match caches.last() {
            Some(c) => c.output.view(),
            None => batch.features.view(),
        };
        let cache = match spec.kind {
            LayerKind::GraphConv { .. } | LayerKind::Linear { .. } => {
                let p = params[i].as_ref().expect("dense layer has parameters");
                let mixed = match spec.kind {
                    LayerKind::GraphConv { .. } => batch.propagation.apply(input),
                    _ => input.to_owned(),
                };
                let mut z = mixed.dot(&p.weight);
                z += &p.bias;
                let output = activate(spec.activation, &z);
                LayerCache { mixed: Some(mixed), pre_activation: Some(z), argmax: None, output }
            }
            LayerKind::GlobalMaxPool => {
                let graphs = batch.segments.len() - 1;
                let width = input.ncols();
                let mut output = Array2::zeros((graphs, width));
                let mut argmax = Array2::zeros((graphs, width));
                for g in 0..graphs {
                    let (start, end) = (batch.segments[g], batch.segments[g + 1]);
                    for c in 0..width {
                        let mut best = start;
                        for v in start + 1..end {
                            if input[[v, c]] > input[[best, c]] {
                                best = v;
                            }
                        }
                        output[[g, c]] = input[[best, c]];
                        argmax[[g, c]] = best;
                    }
                }
                LayerCache { mixed: None, pre_activation: None, argmax: Some(argmax), output }
            }
        };
        caches.push(cache);
    }
    caches
}

fn activate(activation: Activation, z: &Array2<f64>) -> Array2<f64> {
    match activation {
        Activation::Relu => z.mapv(|x| x.max(0.0)),
        Activation::None => z.clone(),
        Activation::LogSoftmax => {
            let mut out = z.clone();
            for mut row in out.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                let log_sum = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
                row.mapv_inplace(|x| x - log_sum);
            }
            out
        }
    }
}

/// Mean negative log-likelihood over training units.
fn nll(log_probs: &Array2<f64>, batch: &Batch) -> f64 {
    let n = batch.num_train().max(1) as f64;
    let total: f64 = (0..batch.labels.len())
        .filter(|&i| batch.train_mask[i])
        .map(|i| -log_probs[[i, batch.labels[i]]])
        .sum();
    total / n
}

/// Gradients in the same layout as the parameters.
fn backward(
    config: &ModelConfig,
    params: &[Option<LayerParams>],
    batch: &Batch,
    caches: &[LayerCache],
) -> Vec<Option<LayerParams>> {
    let layers = config.layers.len();
    let mut grads: Vec<Option<LayerParams>> = vec![None; layers];
    let weight = 1.0 / batch.num_train().max(1) as f64;

    // log-softmax + NLL: d/dz = softmax - onehot on training rows.
    let last = &caches[layers - 1].output;
    let mut upstream = last.mapv(f64::exp);
    for (i, mut row) in upstream.rows_mut().into_iter().enumerate() {
        if batch.train_mask[i] {
            row[batch.labels[i]] -= 1.0;
            row *= weight;
        } else {
            row.fill(0.0);
        }
    }
    let mut upstream_is_pre_activation = true;

    for i in (0..layers).rev() {
        let spec = &config.layers[i];
        let cache = &caches[i];
        match spec.kind {
            LayerKind::GraphConv { .. } | LayerKind::Linear { .. } => {
                let mut dz = upstream;
                if !upstream_is_pre_activation && spec.activation == Activation::Relu {
                    let z = cache.pre_activation.as_ref().unwrap();
                    Zip::from(&mut dz).and(z).for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
                }
                let mixed = cache.mixed.as_ref().unwrap();
                let p = params[i].as_ref().unwrap();
                grads[i] = Some(LayerParams { weight: mixed.t().dot(&dz), bias: dz.sum_axis(Axis(0)) });
                if i == 0 {
                    break;
                }
                let d_mixed = dz.dot(&p.weight.t());
                upstream = match spec.kind {
                    LayerKind::GraphConv { .. } => batch.propagation.apply(d_mixed.view()),
                    _ => d_mixed,
                };
            }
            LayerKind::GlobalMaxPool => {
                let argmax = cache.argmax.as_ref().unwrap();
                let input_rows = caches[i - 1].output.nrows();
                let mut d_input = Array2::zeros((input_rows, upstream.ncols()));
                for ((g, c), &node) in argmax.indexed_iter() {
                    d_input[[node, c]] += upstream[[g, c]];
                }
                upstream = d_input;
            }
        }
        upstream_is_pre_activation = false;
    }
    grads
}

fn init_params(config: &ModelConfig, input_dim: usize) -> Vec<Option<LayerParams>> {
    let mut rng = rng::seeded(config.seed, streams::WEIGHTS);
    let mut width = input_dim;
    config
        .layers
        .iter()
        .map(|spec| match spec.kind {
            LayerKind::GraphConv { width: out } | LayerKind::Linear { width: out } => {
                let bound = (6.0 / (width + out) as f64).sqrt();
                let weight = Array2::from_shape_fn((width, out), |_| rng.random_range(-bound..bound));
                width = out;
                Some(LayerParams { weight, bias: Array1::zeros(out) })
            }
            LayerKind::GlobalMaxPool => None,
        })
        .collect()
}

fn argmax_rows(m: ArrayView2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn split_accuracy(log_probs: &Array2<f64>, batch: &Batch) -> (f64, f64) {
    let predicted = argmax_rows(log_probs.view());
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for (i, &p) in predicted.iter().enumerate() {
        let s = usize::from(!batch.train_mask[i]);
        totals[s] += 1;
        hits[s] += usize::from(p == batch.labels[i]);
    }
    let ratio = |h: usize, t: usize| if t == 0 { 0.0 } else { h as f64 / t as f64 };
    (ratio(hits[0], totals[0]), ratio(hits[1], totals[1]))
}

fn make_trace(config: &ModelConfig, caches: Vec<LayerCache>) -> ActivationTrace {
    let mut unit = TraceUnit::Node;
    let units = config
        .layers
        .iter()
        .map(|l| {
            if l.kind == LayerKind::GlobalMaxPool {
                unit = TraceUnit::Graph;
            }
            unit
        })
        .collect();
    ActivationTrace {
        layers: caches.into_iter().map(|c| c.output).collect(),
        units,
        is_conv: config.layers.iter().map(|l| l.is_conv()).collect(),
        last_conv: config.last_conv_layer().expect("validated config has a conv layer"),
    }
}

struct Adam {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: i32,
    learning_rate: f64,
}

impl Adam {
    fn new(params: &[Option<LayerParams>], learning_rate: f64) -> Self {
        let sizes: Vec<usize> = tensors(params).map(|t| t.len()).collect();
        Adam {
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            learning_rate,
        }
    }

    fn update(&mut self, params: &mut [Option<LayerParams>], grads: &[Option<LayerParams>]) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for (k, (p, g)) in tensors_mut(params).zip(tensors(grads)).enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for j in 0..p.len() {
                m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

fn tensors(params: &[Option<LayerParams>]) -> impl Iterator<Item = &[f64]> {
    params.iter().flatten().flat_map(|p| {
        [
            p.weight.as_slice().expect("standard layout"),
            p.bias.as_slice().expect("standard layout"),
        ]
    })
}

fn tensors_mut(params: &mut [Option<LayerParams>]) -> impl Iterator<Item = &mut [f64]> {
    params.iter_mut().flatten().flat_map(|p| {
        [
            p.weight.as_slice_mut().expect("standard layout"),
            p.bias.as_slice_mut().expect("standard layout"),
        ]
    })
}

/// An untrained model with seeded Glorot-uniform weights and zero biases.
pub fn init_model(dataset: &Dataset, config: &ModelConfig) -> Result<TrainedModel> {
    config.validate_for(dataset)?;
    let batch = Batch::new(dataset);
    let params = init_params(config, dataset.feature_dim());
    let caches = forward_pass(config, &params, &batch);
    let out = &caches.last().unwrap().output;
    let loss = nll(out, &batch);
    let (train_accuracy, test_accuracy) = split_accuracy(out, &batch);
    Ok(TrainedModel {
        config: config.clone(),
        params,
        train_accuracy,
        test_accuracy,
        initial_loss: loss,
        final_loss: loss,
    })
}

/// Full-batch Adam on the training-split NLL for `config.epochs` epochs.
pub fn train(dataset: &Dataset, config: &ModelConfig) -> Result<TrainedModel> {
    config.validate_for(dataset)?;
    let batch = Batch::new(dataset);
    let mut params = init_params(config, dataset.feature_dim());
    let mut adam = Adam::new(&params, config.learning_rate);
    let mut initial_loss = f64::NAN;
    for epoch in 0..config.epochs {
        let caches = forward_pass(config, &params, &batch);
        let loss = nll(&caches.last().unwrap().output, &batch);
        if !loss.is_finite() {
            return Err(Error::Training { epoch, loss });
        }
        if epoch == 0 {
            initial_loss = loss;
        }
        let grads = backward(config, &params, &batch, &caches);
        adam.update(&mut params, &grads);
    }
    let caches = forward_pass(config, &params, &batch);
    let out = &caches.last().unwrap().output;
    let final_loss = nll(out, &batch);
    if !final_loss.is_finite() {
        return Err(Error::Training { epoch: config.epochs, loss: final_loss });
    }
    if config.epochs == 0 {
        initial_loss = final_loss;
    }
    let (train_accuracy, test_accuracy) = split_accuracy(out, &batch);
    Ok(TrainedModel {
        config: config.clone(),
        params,
        train_accuracy,
        test_accuracy,
        initial_loss,
        final_loss,
    })
}

/// Runs the model over the whole dataset, capturing every layer's output.
pub fn forward(model: &TrainedModel, dataset: &Dataset) -> Result<Prediction> {
    model.config.validate_for(dataset)?;
    check_shapes(model, dataset.feature_dim())?;
    let batch = Batch::new(dataset);
    let caches = forward_pass(&model.config, &model.params, &batch);
    let log_probs = caches.last().unwrap().output.clone();
    Ok(Prediction { log_probs, trace: make_trace(&model.config, caches) })
}

fn check_shapes(model: &TrainedModel, input_dim: usize) -> Result<()> {
    let mut width = input_dim;
    for (i, (spec, p)) in model.config.layers.iter().zip(&model.params).enumerate() {
        match (spec.kind, p) {
            (LayerKind::GraphConv { width: out } | LayerKind::Linear { width: out }, Some(p)) => {
                if p.weight.dim() != (width, out) || p.bias.len() != out {
                    return Err(Error::input(format!(
                        "layer {i} weights are {:?}, expected ({width}, {out})",
                        p.weight.dim()
                    )));
                }
                width = out;
            }
            (LayerKind::GlobalMaxPool, None) => {}
            _ => return Err(Error::input(format!("layer {i} parameters do not match its kind"))),
        }
    }
    Ok(())
}

/// Max relative error between backprop and central differences at step `1e-5`.
pub fn gradient_check(config: &ModelConfig, dataset: &Dataset, seed: u64) -> Result<f64> {
    gradient_check_with_step(config, dataset, seed, 1e-5)
}

/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps
/// near-zero gradients from dominating through rounding noise.
pub fn gradient_check_with_step(config: &ModelConfig, dataset: &Dataset, seed: u64, step: f64) -> Result<f64> {
    const MAX_NODES: usize = 30;
    if dataset.total_nodes() > MAX_NODES {
        return Err(Error::Capacity { what: "gradient-check dataset", size: dataset.total_nodes(), limit: MAX_NODES });
    }
    let config = ModelConfig { seed, ..config.clone() };
    config.validate_for(dataset)?;
    let batch = Batch::new(dataset);
    let params = init_params(&config, dataset.feature_dim());
    gradient_error(&config, params, &batch, step)
}

fn gradient_error(config: &ModelConfig, mut params: Vec<Option<LayerParams>>, batch: &Batch, step: f64) -> Result<f64> {
    let caches = forward_pass(config, &params, batch);
    let analytic: Vec<Vec<f64>> = tensors(&backward(config, &params, batch, &caches)).map(<[f64]>::to_vec).collect();
    let loss_at = |params: &[Option<LayerParams>]| nll(&forward_pass(config, params, batch).last().unwrap().output, batch);
    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let original = tensors(&params).nth(k).unwrap()[j];
            tensors_mut(&mut params).nth(k).unwrap()[j] = original + step;
            let plus = loss_at(&params);
            tensors_mut(&mut params).nth(k).unwrap()[j] = original - step;
            let minus = loss_at(&params);
            tensors_mut(&mut params).nth(k).unwrap()[j] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let denom = grad[j].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((grad[j] - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// Analytic gradients of the training loss at the given parameters, flattened per tensor.
pub fn loss_gradients(model: &TrainedModel, dataset: &Dataset) -> Result<(f64, Vec<Vec<f64>>)> {
    model.config.validate_for(dataset)?;
    check_shapes(model, dataset.feature_dim())?;
    let batch = Batch::new(dataset);
    let caches = forward_pass(&model.config, &model.params, &batch);
    let loss = nll(&caches.last().unwrap().output, &batch);
    let grads = backward(&model.config, &model.params, &batch, &caches);
    Ok((loss, tensors(&grads).map(<[f64]>::to_vec).collect()))
}
