//! The surrogate network: a small 1-D convolutional stack with SELU
//! activations and a dense head, trained with Adam on global-search
//! labels to map demand instances straight to rate allocations.
//!
//! Everything runs in double precision on flat `Vec<f64>` buffers so the
//! finite-difference gradient checks can use tight tolerances. Training
//! is single-threaded and bitwise deterministic in (seed, data, config).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::model::{DemandInstance, RateAllocation};
use crate::rng::{mix, SplitMix64};

/// SELU scale (omega).
pub const SELU_SCALE: f64 = 1.0507;
/// SELU alpha (eta).
pub const SELU_ALPHA: f64 = 1.6733;

/// Rates are scaled into [0, 1] by this constant, both in features and
/// in labels.
pub const RATE_SCALE_MBPS: f64 = 750.0;

/// Slice count the surrogate is wired for.
pub const SURROGATE_SLICES: usize = 4;
/// Path count the surrogate is wired for.
pub const SURROGATE_PATHS: usize = 3;
/// Topology index one-hot width.
pub const SURROGATE_TOPOLOGIES: usize = 4;
/// Input feature length: min rates, demands, topology one-hot.
pub const SURROGATE_FEATURES: usize = 2 * SURROGATE_SLICES * SURROGATE_PATHS + SURROGATE_TOPOLOGIES;

pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE * x
    } else {
        SELU_SCALE * (SELU_ALPHA * math::exp(x) - SELU_ALPHA)
    }
}

pub fn selu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE
    } else {
        SELU_SCALE * SELU_ALPHA * math::exp(x)
    }
}

/// Derivative recovered from the activation value, avoiding a second
/// exponential: for x <= 0, selu'(x) = selu(x) + scale * alpha.
#[inline]
fn selu_derivative_from(pre: f64, act: f64) -> f64 {
    if pre > 0.0 {
        SELU_SCALE
    } else {
        act + SELU_SCALE * SELU_ALPHA
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    ShapeMismatch { what: &'static str },
    EmptyDataset,
    InvalidConfig { what: &'static str },
    InvalidTopologyIndex { index: usize },
    InstanceDims { slices: usize, paths: usize },
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            NnError::EmptyDataset => write!(f, "training dataset is empty"),
            NnError::InvalidConfig { what } => write!(f, "invalid training config: {what}"),
            NnError::InvalidTopologyIndex { index } => {
                write!(f, "topology index {index} outside 1..={SURROGATE_TOPOLOGIES}")
            }
            NnError::InstanceDims { slices, paths } => write!(
                f,
                "instance is {slices}x{paths}, surrogate expects \
                 {SURROGATE_SLICES}x{SURROGATE_PATHS}"
            ),
        }
    }
}

impl core::error::Error for NnError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Selu,
    Linear,
}

/// Layer shape descriptor. Convolutions are 1-D, stride 1, zero
/// "same" padding with an odd kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn weight_len(&self) -> usize {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel,
            LayerSpec::Dense {
                inputs, outputs, ..
            } => outputs * inputs,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { out_channels, .. } => out_channels,
            LayerSpec::Dense { outputs, .. } => outputs,
        }
    }

    pub fn activation(&self) -> Activation {
        match *self {
            LayerSpec::Conv1d { activation, .. } | LayerSpec::Dense { activation, .. } => {
                activation
            }
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(spec: LayerSpec, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, NnError> {
        if weights.len() != spec.weight_len() {
            return Err(NnError::ShapeMismatch {
                what: "layer weight length",
            });
        }
        if bias.len() != spec.bias_len() {
            return Err(NnError::ShapeMismatch {
                what: "layer bias length",
            });
        }
        if let LayerSpec::Conv1d { kernel, .. } = spec {
            if kernel == 0 || kernel % 2 == 0 {
                return Err(NnError::ShapeMismatch {
                    what: "conv kernel must be odd",
                });
            }
        }
        Ok(Layer {
            spec,
            weights,
            bias,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Network architecture: an input sequence (single channel), a stack of
/// conv blocks, SELU dense hidden layers, and a linear output layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_len: usize,
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub dense_widths: Vec<usize>,
    pub outputs: usize,
}

impl Architecture {
    /// The default surrogate: 8 conv blocks and 2 dense hidden layers
    /// (10 hidden layers in total) ahead of the linear output. Widths
    /// are sized so a double-precision forward pass stays well under
    /// the greedy solver's per-instance runtime.
    pub fn surrogate_default() -> Self {
        Architecture {
            input_len: SURROGATE_FEATURES,
            conv_channels: vec![4, 4, 8, 8, 8, 8, 4, 4],
            kernel: 3,
            dense_widths: vec![32, 16],
            outputs: SURROGATE_SLICES * SURROGATE_PATHS,
        }
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut channels = 1;
        for &out in &self.conv_channels {
            specs.push(LayerSpec::Conv1d {
                in_channels: channels,
                out_channels: out,
                kernel: self.kernel,
                activation: Activation::Selu,
            });
            channels = out;
        }
        let mut width = channels * self.input_len;
        for &out in &self.dense_widths {
            specs.push(LayerSpec::Dense {
                inputs: width,
                outputs: out,
                activation: Activation::Selu,
            });
            width = out;
        }
        specs.push(LayerSpec::Dense {
            inputs: width,
            outputs: self.outputs,
            activation: Activation::Linear,
        });
        specs
    }
}

/// The surrogate model: an ordered layer list plus the input sequence
/// length. Counting the input and output, the default build is the
/// 12-layer structure (10 hidden layers).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    input_len: usize,
    layers: Vec<Layer>,
}

impl SurrogateModel {
    /// LeCun-normal initialisation (std = 1/sqrt(fan_in)), the pairing
    /// that keeps SELU stacks self-normalising. Deterministic in seed.
    pub fn init(architecture: &Architecture, seed: u64) -> Self {
        let mut rng = SplitMix64::new(mix(seed, 0x5e1f));
        let layers = architecture
            .layer_specs()
            .into_iter()
            .map(|spec| {
                let std = 1.0 / math::sqrt(spec.fan_in() as f64);
                let weights = (0..spec.weight_len())
                    .map(|_| rng.next_gaussian() * std)
                    .collect();
                let bias = vec![0.0; spec.bias_len()];
                Layer {
                    spec,
                    weights,
                    bias,
                }
            })
            .collect();
        SurrogateModel {
            input_len: architecture.input_len,
            layers,
        }
    }

    /// Builds a model from explicit layers, validating that the shapes
    /// chain from the input sequence to the output vector.
    pub fn from_layers(input_len: usize, layers: Vec<Layer>) -> Result<Self, NnError> {
        if input_len == 0 || layers.is_empty() {
            return Err(NnError::ShapeMismatch {
                what: "model needs an input length and at least one layer",
            });
        }
        let mut channels = 1usize;
        let mut flat = input_len;
        let mut dense_seen = false;
        for layer in &layers {
            match *layer.spec() {
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    ..
                } => {
                    if dense_seen {
                        return Err(NnError::ShapeMismatch {
                            what: "conv layer after dense layer",
                        });
                    }
                    if in_channels != channels {
                        return Err(NnError::ShapeMismatch {
                            what: "conv input channels",
                        });
                    }
                    channels = out_channels;
                    flat = out_channels * input_len;
                }
                LayerSpec::Dense { inputs, outputs, .. } => {
                    if inputs != flat {
                        return Err(NnError::ShapeMismatch {
                            what: "dense input width",
                        });
                    }
                    dense_seen = true;
                    flat = outputs;
                }
            }
        }
        Ok(SurrogateModel { input_len, layers })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.layers
            .last()
            .map(|l| l.spec().bias_len())
            .unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        &mut self.layers[index]
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn layer_output_len(&self, index: usize) -> usize {
        match *self.layers[index].spec() {
            LayerSpec::Conv1d { out_channels, .. } => out_channels * self.input_len,
            LayerSpec::Dense { outputs, .. } => outputs,
        }
    }
}

/// Input features: minimum rates and demands scaled by
/// [`RATE_SCALE_MBPS`], then the topology index one-hot.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn featurize(
    instance: &DemandInstance,
    topology_index: usize,
) -> Result<FeatureVector, NnError> {
    if instance.slice_count() != SURROGATE_SLICES || instance.path_count() != SURROGATE_PATHS {
        return Err(NnError::InstanceDims {
            slices: instance.slice_count(),
            paths: instance.path_count(),
        });
    }
    if !(1..=SURROGATE_TOPOLOGIES).contains(&topology_index) {
        return Err(NnError::InvalidTopologyIndex {
            index: topology_index,
        });
    }
    let mut values = Vec::with_capacity(SURROGATE_FEATURES);
    values.extend(instance.min_rates().iter().map(|r| r / RATE_SCALE_MBPS));
    values.extend(instance.max_demands().iter().map(|r| r / RATE_SCALE_MBPS));
    for t in 1..=SURROGATE_TOPOLOGIES {
        values.push(if t == topology_index { 1.0 } else { 0.0 });
    }
    Ok(FeatureVector { values })
}

/// Pre-activations and activations of every layer from one forward
/// pass; the backward pass reads them back.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// activations[0] is the input; activations[l + 1] the output of
    /// layer l.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Preallocates buffers sized for `model`; reusable across calls.
    pub fn for_model(model: &SurrogateModel) -> Self {
        let mut activations = Vec::with_capacity(model.layers.len() + 1);
        activations.push(vec![0.0; model.input_len]);
        let mut pre_activations = Vec::with_capacity(model.layers.len());
        for l in 0..model.layers.len() {
            let len = model.layer_output_len(l);
            activations.push(vec![0.0; len]);
            pre_activations.push(vec![0.0; len]);
        }
        ForwardCache {
            activations,
            pre_activations,
        }
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has layers")
    }
}

fn conv_forward(
    input: &[f64],
    output: &mut [f64],
    weights: &[f64],
    bias: &[f64],
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    len: usize,
) {
    let offset = kernel / 2;
    for o in 0..out_channels {
        let out_row = &mut output[o * len..(o + 1) * len];
        out_row.fill(bias[o]);
        for ci in 0..in_channels {
            let in_row = &input[ci * len..(ci + 1) * len];
            let w_base = (o * in_channels + ci) * kernel;
            for k in 0..kernel {
                let w = weights[w_base + k];
                if w == 0.0 {
                    continue;
                }
                // shift applied to the input index: x + k - offset
                let (x_lo, x_hi) = shift_range(k, offset, len);
                let shift = k as isize - offset as isize;
                for x in x_lo..x_hi {
                    out_row[x] += w * in_row[(x as isize + shift) as usize];
                }
            }
        }
    }
}

/// Valid output positions for a kernel tap: `0 <= x + k - offset < len`.
#[inline]
fn shift_range(k: usize, offset: usize, len: usize) -> (usize, usize) {
    let shift = k as isize - offset as isize;
    let lo = if shift < 0 { (-shift) as usize } else { 0 };
    let hi = if shift > 0 { len - shift as usize } else { len };
    (lo, hi.max(lo))
}

fn dense_forward(input: &[f64], output: &mut [f64], weights: &[f64], bias: &[f64]) {
    let inputs = input.len();
    for (o, out) in output.iter_mut().enumerate() {
        let row = &weights[o * inputs..(o + 1) * inputs];
        let mut acc = bias[o];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        *out = acc;
    }
}

/// Forward pass into a reusable cache.
pub fn forward_with(
    model: &SurrogateModel,
    features: &[f64],
    cache: &mut ForwardCache,
) -> Result<(), NnError> {
    if features.len() != model.input_len {
        return Err(NnError::ShapeMismatch {
            what: "feature length",
        });
    }
    if cache.activations.len() != model.layers.len() + 1
        || cache.activations[0].len() != model.input_len
    {
        return Err(NnError::ShapeMismatch {
            what: "cache shape",
        });
    }
    cache.activations[0].copy_from_slice(features);
    for (l, layer) in model.layers.iter().enumerate() {
        let (before, after) = cache.activations.split_at_mut(l + 1);
        let input = &before[l];
        let act_out = &mut after[0];
        let pre = &mut cache.pre_activations[l];
        match *layer.spec() {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                conv_forward(
                    input,
                    pre,
                    &layer.weights,
                    &layer.bias,
                    in_channels,
                    out_channels,
                    kernel,
                    model.input_len,
                );
            }
            LayerSpec::Dense { .. } => {
                dense_forward(input, pre, &layer.weights, &layer.bias);
            }
        }
        match layer.spec().activation() {
            Activation::Selu => {
                for (a, &z) in act_out.iter_mut().zip(pre.iter()) {
                    *a = selu(z);
                }
            }
            Activation::Linear => act_out.copy_from_slice(pre),
        }
    }
    Ok(())
}

/// Deterministic forward pass; output is in scaled units.
pub fn forward(
    model: &SurrogateModel,
    features: &FeatureVector,
) -> Result<(Vec<f64>, ForwardCache), NnError> {
    let mut cache = ForwardCache::for_model(model);
    forward_with(model, features.values(), &mut cache)?;
    let output = cache.output().to_vec();
    Ok((output, cache))
}

/// Per-layer parameter gradients, shaped exactly like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &SurrogateModel) -> Self {
        Gradients {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.bias[layer]
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    fn reset(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.bias {
            b.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= factor;
            }
        }
        for b in &mut self.bias {
            for v in b {
                *v *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for w in self.weights.iter().chain(self.bias.iter()) {
            for &v in w {
                m = m.max(math::abs(v));
            }
        }
        m
    }
}

/// Per-sample loss: mean squared error over the output vector.
pub fn sample_loss(output: &[f64], target: &[f64]) -> f64 {
    let m = output.len() as f64;
    output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
        / m
}

/// Backpropagates the per-sample MSE and accumulates parameter
/// gradients into `grads` (they are not reset first).
pub fn backward_into(
    model: &SurrogateModel,
    cache: &ForwardCache,
    target: &[f64],
    grads: &mut Gradients,
) -> Result<(), NnError> {
    let output = cache.output();
    if target.len() != output.len() {
        return Err(NnError::ShapeMismatch {
            what: "target length",
        });
    }
    if grads.weights.len() != model.layers.len() {
        return Err(NnError::ShapeMismatch {
            what: "gradient layer count",
        });
    }

    let m = output.len() as f64;
    // dL/da for the current layer output, walking backwards.
    let mut delta: Vec<f64> = output
        .iter()
        .zip(target)
        .map(|(o, t)| 2.0 * (o - t) / m)
        .collect();

    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let pre = &cache.pre_activations[l];
        let input = &cache.activations[l];
        let act_out = &cache.activations[l + 1];

        // Through the activation: dL/dz.
        if layer.spec().activation() == Activation::Selu {
            for ((d, &z), &a) in delta.iter_mut().zip(pre.iter()).zip(act_out.iter()) {
                *d *= selu_derivative_from(z, a);
            }
        }

        let gw = &mut grads.weights[l];
        let gb = &mut grads.bias[l];
        match *layer.spec() {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let mut next_delta = vec![0.0; inputs];
                for o in 0..outputs {
                    let d = delta[o];
                    gb[o] += d;
                    let row = &layer.weights[o * inputs..(o + 1) * inputs];
                    let grow = &mut gw[o * inputs..(o + 1) * inputs];
                    for i in 0..inputs {
                        grow[i] += d * input[i];
                        next_delta[i] += d * row[i];
                    }
                }
                delta = next_delta;
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let len = model.input_len;
                let offset = kernel / 2;
                let mut next_delta = vec![0.0; in_channels * len];
                for o in 0..out_channels {
                    let drow = &delta[o * len..(o + 1) * len];
                    gb[o] += drow.iter().sum::<f64>();
                    for ci in 0..in_channels {
                        let in_row = &input[ci * len..(ci + 1) * len];
                        let nd_row = &mut next_delta[ci * len..(ci + 1) * len];
                        let w_base = (o * in_channels + ci) * kernel;
                        for k in 0..kernel {
                            let (x_lo, x_hi) = shift_range(k, offset, len);
                            let shift = k as isize - offset as isize;
                            let w = layer.weights[w_base + k];
                            let mut wg = 0.0;
                            for x in x_lo..x_hi {
                                let xi = (x as isize + shift) as usize;
                                wg += drow[x] * in_row[xi];
                                nd_row[xi] += w * drow[x];
                            }
                            gw[w_base + k] += wg;
                        }
                    }
                }
                delta = next_delta;
            }
        }
    }
    Ok(())
}

/// Gradients of the per-sample MSE with respect to every parameter.
pub fn backward(
    model: &SurrogateModel,
    cache: &ForwardCache,
    target: &[f64],
) -> Result<Gradients, NnError> {
    let mut grads = Gradients::zeros_like(model);
    backward_into(model, cache, target, &mut grads)?;
    Ok(grads)
}

/// Adam optimizer state: first/second moment estimates per parameter
/// and the step counter driving bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(model: &SurrogateModel) -> Self {
        AdamState {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction.
pub fn adam_step(
    state: &mut AdamState,
    model: &mut SurrogateModel,
    grads: &Gradients,
    learning_rate: f64,
) -> Result<(), NnError> {
    if grads.weights.len() != model.layers.len() {
        return Err(NnError::ShapeMismatch {
            what: "gradient layer count",
        });
    }
    state.step += 1;
    let bc1 = 1.0 - pow_int(state.beta1, state.step);
    let bc2 = 1.0 - pow_int(state.beta2, state.step);
    for l in 0..model.layers.len() {
        adam_update_slice(
            &mut model.layers[l].weights,
            &grads.weights[l],
            &mut state.m.weights[l],
            &mut state.v.weights[l],
            state.beta1,
            state.beta2,
            state.epsilon,
            learning_rate,
            bc1,
            bc2,
        );
        adam_update_slice(
            &mut model.layers[l].bias,
            &grads.bias[l],
            &mut state.m.bias[l],
            &mut state.v.bias[l],
            state.beta1,
            state.beta2,
            state.epsilon,
            learning_rate,
            bc1,
            bc2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (math::sqrt(v_hat) + epsilon);
    }
}

fn pow_int(base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut base = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

/// One training sample, already scaled: features per [`featurize`],
/// target rates divided by [`RATE_SCALE_MBPS`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-4,
            batch_size: 32,
            seed: 0,
            architecture: Architecture::surrogate_default(),
        }
    }
}

/// Mini-batch Adam over shuffled epochs. Returns the trained model and
/// the per-epoch mean loss history; both are bitwise deterministic in
/// (seed, data, config).
pub fn train(
    samples: &[TrainSample],
    config: &TrainConfig,
) -> Result<(SurrogateModel, Vec<f64>), NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if config.epochs < 1 {
        return Err(NnError::InvalidConfig { what: "epochs" });
    }
    if !(config.learning_rate > 0.0) {
        return Err(NnError::InvalidConfig {
            what: "learning_rate",
        });
    }
    if config.batch_size < 1 {
        return Err(NnError::InvalidConfig { what: "batch_size" });
    }
    let mut model = SurrogateModel::init(&config.architecture, config.seed);
    for sample in samples {
        if sample.features.len() != model.input_len() {
            return Err(NnError::ShapeMismatch {
                what: "sample feature length",
            });
        }
        if sample.target.len() != model.output_len() {
            return Err(NnError::ShapeMismatch {
                what: "sample target length",
            });
        }
    }

    let mut adam = AdamState::new(&model);
    let mut cache = ForwardCache::for_model(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut rng = SplitMix64::new(mix(config.seed, 0x7a1e + epoch as u64));
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.reset();
            for &idx in batch {
                let sample = &samples[idx];
                forward_with(&model, &sample.features, &mut cache)?;
                epoch_loss += sample_loss(cache.output(), &sample.target);
                backward_into(&model, &cache, &sample.target, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut adam, &mut model, &grads, config.learning_rate)?;
        }
        history.push(epoch_loss / samples.len() as f64);
    }
    Ok((model, history))
}

/// Raw surrogate inference in Mbps. The output is clamped at zero but
/// is otherwise unconstrained; callers must pass it through the repair
/// stage before use.
pub fn infer(
    model: &SurrogateModel,
    instance: &DemandInstance,
    topology_index: usize,
) -> Result<RateAllocation, NnError> {
    let features = featurize(instance, topology_index)?;
    if model.output_len() != SURROGATE_SLICES * SURROGATE_PATHS {
        return Err(NnError::ShapeMismatch {
            what: "model output width",
        });
    }
    let (output, _) = forward(model, &features)?;
    let rates: Vec<f64> = output
        .iter()
        .map(|&v| (v * RATE_SCALE_MBPS).max(0.0))
        .collect();
    RateAllocation::new(SURROGATE_SLICES, SURROGATE_PATHS, rates).map_err(|_| {
        NnError::ShapeMismatch {
            what: "inferred rates",
        }
    })
}

/// Same as [`infer`] with a caller-owned cache, for hot paths.
pub fn infer_with(
    model: &SurrogateModel,
    instance: &DemandInstance,
    topology_index: usize,
    cache: &mut ForwardCache,
) -> Result<RateAllocation, NnError> {
    let features = featurize(instance, topology_index)?;
    forward_with(model, features.values(), cache)?;
    let rates: Vec<f64> = cache
        .output()
        .iter()
        .map(|&v| (v * RATE_SCALE_MBPS).max(0.0))
        .collect();
    RateAllocation::new(SURROGATE_SLICES, SURROGATE_PATHS, rates).map_err(|_| {
        NnError::ShapeMismatch {
            what: "inferred rates",
        }
    })
}
