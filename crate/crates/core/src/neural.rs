//! Multilayer perceptrons with exact reverse-mode gradients, Glorot
//! initialization, and SGD/Adam training.
//!
//! Parameters are one flat vector. Layer `l` occupies `fan_out * fan_in`
//! weights (row-major, one row per output unit) followed by `fan_out` biases.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result as CrateResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("invalid network spec: {0}")]
    BadSpec(String),
    #[error("parameter vector has {got} values, spec needs {expected}")]
    ParamCount { got: usize, expected: usize },
    #[error("input width {got} does not match network input width {expected}")]
    Width { got: usize, expected: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite values at layer {layer}")]
    NonFiniteLayer { layer: usize },
    #[error("loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("optimizer config: {0}")]
    BadOptimizer(String),
}

type Result<T> = std::result::Result<T, NeuralError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's own output.
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Layer widths from input to output plus one activation per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activations,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(NeuralError::BadSpec("need at least an input and an output layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(NeuralError::BadSpec("layer sizes must be positive".into()));
        }
        if self.activations.len() != self.layer_sizes.len() - 1 {
            return Err(NeuralError::BadSpec(format!(
                "{} layers need {} activations, got {}",
                self.layer_sizes.len(),
                self.layer_sizes.len() - 1,
                self.activations.len()
            )));
        }
        Ok(())
    }

    /// `input → hidden… → output` with ReLU hidden layers.
    pub fn relu_mlp(input: usize, hidden: &[usize], output: usize, last: Activation) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(last);
        Self::new(sizes, acts)
    }

    /// Default generator: 2→64→64→2, linear output.
    pub fn default_generator(noise_dim: usize, data_dim: usize) -> Self {
        Self::relu_mlp(noise_dim, &[64, 64], data_dim, Activation::Linear).expect("valid default")
    }

    /// Default classifier: 2→64→64→1, sigmoid output.
    pub fn default_classifier(data_dim: usize) -> Self {
        Self::relu_mlp(data_dim, &[64, 64], 1, Activation::Sigmoid).expect("valid default")
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> Activation {
        *self.activations.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .zip(&self.activations)
            .map(move |(w, &act)| {
                let layer = Layer {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                    act,
                };
                offset += (w[0] + 1) * w[1];
                layer
            })
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
    act: Activation,
}

impl Layer {
    fn weights<'a>(&self, values: &'a [f64]) -> ArrayView2<'a, f64> {
        let n = self.fan_in * self.fan_out;
        ArrayView2::from_shape((self.fan_out, self.fan_in), &values[self.offset..self.offset + n]).unwrap()
    }

    fn bias<'a>(&self, values: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &values[start..start + self.fan_out]
    }
}

/// One pure network strategy: a spec plus its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    spec: MlpSpec,
    values: Vec<f64>,
}

impl NetworkParams {
    pub fn new(spec: MlpSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.param_count() {
            return Err(NeuralError::ParamCount {
                got: values.len(),
                expected: spec.param_count(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::BadSpec("non-finite parameter".into()));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let n = spec.param_count();
        Self {
            spec,
            values: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut values = vec![0.0; spec.param_count()];
        for layer in spec.layers() {
            let a = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut values[layer.offset..layer.offset + layer.fan_in * layer.fan_out] {
                *w = rng.random_range(-a..=a);
            }
        }
        Self {
            spec: spec.clone(),
            values,
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Batched evaluation; large batches run in row chunks to bound memory.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        const CHUNK: usize = 4096;
        if inputs.nrows() <= CHUNK {
            let mut tape = self.forward_tape(inputs)?;
            return Ok(tape.outputs.pop().unwrap());
        }
        let mut out = Array2::zeros((inputs.nrows(), self.spec.output_width()));
        for (src, mut dst) in inputs
            .axis_chunks_iter(Axis(0), CHUNK)
            .zip(out.axis_chunks_iter_mut(Axis(0), CHUNK))
        {
            let mut tape = self.forward_tape(src)?;
            dst.assign(&tape.outputs.pop().unwrap());
        }
        Ok(out)
    }

    /// Forward pass that keeps every layer's output for [`Tape::backward`].
    pub fn forward_tape(&self, inputs: ArrayView2<'_, f64>) -> Result<Tape> {
        if inputs.ncols() != self.spec.input_width() {
            return Err(NeuralError::Width {
                got: inputs.ncols(),
                expected: self.spec.input_width(),
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFiniteInput);
        }
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.spec.activations.len());
        for (l, layer) in self.spec.layers().enumerate() {
            let prev = outputs.last().map_or(inputs, |a| a.view());
            let mut z = prev.dot(&layer.weights(&self.values).t());
            let bias = layer.bias(&self.values);
            for mut row in z.rows_mut() {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v = layer.act.apply(*v + b);
                }
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFiniteLayer { layer: l });
            }
            outputs.push(z);
        }
        Ok(Tape {
            inputs: inputs.to_owned(),
            outputs,
        })
    }

    pub fn save(&self, path: &Path) -> CrateResult<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> CrateResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    /// Text form: a JSON header line `{"layer_sizes":…,"activations":…,"len":N}`
    /// followed by one parameter per line in shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let header = ParamsHeader {
            layer_sizes: self.spec.layer_sizes.clone(),
            activations: self.spec.activations.clone(),
            len: self.values.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut lines = text.lines();
        let header: ParamsHeader = serde_json::from_str(lines.next().unwrap_or(""))
            .map_err(|e| (1, format!("bad parameter header: {e}")))?;
        let spec = MlpSpec::new(header.layer_sizes, header.activations).map_err(|e| (1, e.to_string()))?;
        let mut values = Vec::with_capacity(header.len);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            values.push(line.trim().parse::<f64>().map_err(|e| (i + 2, e.to_string()))?);
        }
        if values.len() != header.len {
            return Err((1, format!("header says {} values, found {}", header.len, values.len())));
        }
        Self::new(spec, values).map_err(|e| (1, e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsHeader {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    len: usize,
}

/// Recorded forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Array2<f64>,
    outputs: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().unwrap()
    }

    /// Back-propagates `d_output` (∂loss/∂outputs).
    ///
    /// Returns the parameter gradient (skipped when `param_grad` is false)
    /// and the gradient with respect to the inputs.
    pub fn backward(
        &self,
        params: &NetworkParams,
        d_output: Array2<f64>,
        param_grad: bool,
    ) -> Result<(Option<Vec<f64>>, Array2<f64>)> {
        let layers: Vec<Layer> = params.spec.layers().collect();
        let mut grad = param_grad.then(|| vec![0.0; params.values.len()]);
        let mut delta = d_output;
        for (l, layer) in layers.iter().enumerate().rev() {
            let out = &self.outputs[l];
            delta.zip_mut_with(out, |d, y| *d *= layer.act.slope_from_output(*y));
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFiniteLayer { layer: l });
            }
            let prev = if l == 0 { self.inputs.view() } else { self.outputs[l - 1].view() };
            if let Some(g) = grad.as_mut() {
                let dw = delta.t().dot(&prev);
                let nw = layer.fan_in * layer.fan_out;
                let dst = &mut g[layer.offset..layer.offset + nw];
                for (d, s) in dst.iter_mut().zip(dw.iter()) {
                    *d = *s;
                }
                let db = delta.sum_axis(Axis(0));
                for (d, s) in g[layer.offset + nw..layer.offset + nw + layer.fan_out]
                    .iter_mut()
                    .zip(db.iter())
                {
                    *d = *s;
                }
            }
            delta = delta.dot(&layer.weights(&params.values));
        }
        Ok((grad, delta))
    }
}

/// Loss value and parameter gradient of `loss(outputs)`.
///
/// `loss` returns the scalar and its gradient with respect to the outputs.
pub fn gradient(
    params: &NetworkParams,
    inputs: ArrayView2<'_, f64>,
    loss: impl FnOnce(&Array2<f64>) -> (f64, Array2<f64>),
) -> Result<(f64, Vec<f64>)> {
    let tape = params.forward_tape(inputs)?;
    let (value, d_out) = loss(tape.output());
    if !value.is_finite() {
        return Err(NeuralError::NonFiniteLayer {
            layer: params.spec.activations.len(),
        });
    }
    let (g, _) = tape.backward(params, d_out, true)?;
    Ok((value, g.unwrap()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::rbbr()
    }
}

impl OptimizerConfig {
    /// Best-response training: 1000 iterations, lr 1e-3, batch 128.
    pub fn rbbr() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 128,
            iterations: 1000,
        }
    }

    /// Baseline GAN training: 2500 iterations, lr 2e-4, batch 64.
    pub fn gan() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 64,
            iterations: 2500,
            ..Self::rbbr()
        }
    }

    pub fn sgd(learning_rate: f64, iterations: usize) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            iterations,
            ..Self::rbbr()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NeuralError::BadOptimizer(m.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.kind == OptimizerKind::Adam
            && !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0)
        {
            return bad("adam needs beta1, beta2 in [0, 1) and epsilon > 0");
        }
        Ok(())
    }
}

/// First-order optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: &OptimizerConfig, len: usize) -> Self {
        Self {
            cfg: cfg.clone(),
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let lr = self.cfg.learning_rate;
        match self.cfg.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.epsilon);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Minimizes `objective` for exactly `opt.iterations` steps.
///
/// `objective(params, rng, iteration)` draws its own minibatch and returns
/// the loss with its parameter gradient.
pub fn train<R, F>(mut params: NetworkParams, mut objective: F, opt: &OptimizerConfig, rng: &mut R) -> CrateResult<NetworkParams>
where
    R: Rng + ?Sized,
    F: FnMut(&NetworkParams, &mut R, usize) -> CrateResult<(f64, Vec<f64>)>,
{
    opt.validate()?;
    let mut state = Optimizer::new(opt, params.values.len());
    for it in 0..opt.iterations {
        let (loss, grad) = objective(&params, rng, it)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NeuralError::Diverged { iteration: it }.into());
        }
        state.step(&mut params.values, &grad);
    }
    Ok(params)
}
