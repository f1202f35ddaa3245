#![allow(dead_code)]

use gangs::neural::{self, Activation, MlpSpec, NetworkParams};
use gangs::seed::rng_from;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Worst mismatch between analytic and central-difference gradients of one
/// random network, split into the relative error over components of size
/// at least `1e-4` and the absolute error over the rest.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradError {
    pub rel: f64,
    pub abs_small: f64,
}

impl GradError {
    pub fn worst(self, o: GradError) -> GradError {
        GradError { rel: self.rel.max(o.rel), abs_small: self.abs_small.max(o.abs_small) }
    }

    pub fn within(&self, rel: f64, abs: f64) -> bool {
        self.rel <= rel && self.abs_small <= abs
    }

    fn add(&mut self, analytic: f64, fd: f64) {
        let scale = analytic.abs().max(fd.abs());
        let diff = (analytic - fd).abs();
        if scale >= 1e-4 {
            self.rel = self.rel.max(diff / scale);
        } else {
            self.abs_small = self.abs_small.max(diff);
        }
    }
}

pub fn random_mlp<R: Rng>(rng: &mut R) -> MlpSpec {
    let hidden = [Activation::Relu, Activation::Tanh, Activation::Sigmoid];
    let last = [Activation::Linear, Activation::Sigmoid, Activation::Tanh];
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=4)];
    let mut acts = Vec::new();
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=10));
        acts.push(hidden[rng.random_range(0..hidden.len())]);
    }
    sizes.push(rng.random_range(1..=3));
    acts.push(last[rng.random_range(0..last.len())]);
    MlpSpec::new(sizes, acts).unwrap()
}

/// Loss `Σ w·y + ½ Σ y²` over the batch outputs, with its output gradient.
fn loss(w: &Array2<f64>, out: &Array2<f64>) -> (f64, Array2<f64>) {
    let v = (w * out).sum() + 0.5 * out.mapv(|y| y * y).sum();
    (v, w + out)
}

/// Checks parameter and input gradients of one random network.
pub fn gradient_check(seed: u64) -> GradError {
    let mut rng = rng_from(seed, &[0x6ead]);
    let spec = random_mlp(&mut rng);
    let mut params = NetworkParams::init(&spec, &mut rng);
    // Nonzero biases so ReLU units are not all switched the same way.
    for v in params.values_mut() {
        *v += 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
    }
    let n = 5;
    let x = Array2::from_shape_simple_fn((n, spec.input_width()), || StandardNormal.sample(&mut rng));
    let w = Array2::from_shape_simple_fn((n, spec.output_width()), || StandardNormal.sample(&mut rng));
    let value = |p: &NetworkParams, x: &Array2<f64>| loss(&w, &p.forward(x.view()).unwrap()).0;

    let (_, grad) = neural::gradient(&params, x.view(), |out| loss(&w, out)).unwrap();
    let tape = params.forward_tape(x.view()).unwrap();
    let (_, d_x) = tape.backward(&params, loss(&w, tape.output()).1, false).unwrap();

    let h = 1e-6;
    let mut err = GradError::default();
    for k in 0..params.values().len() {
        let orig = params.values()[k];
        params.values_mut()[k] = orig + h;
        let up = value(&params, &x);
        params.values_mut()[k] = orig - h;
        let down = value(&params, &x);
        params.values_mut()[k] = orig;
        err.add(grad[k], (up - down) / (2.0 * h));
    }
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        xp[[r, c]] = x[[r, c]] + h;
        let up = value(&params, &xp);
        xp[[r, c]] = x[[r, c]] - h;
        let down = value(&params, &xp);
        xp[[r, c]] = x[[r, c]];
        err.add(d_x[[r, c]], (up - down) / (2.0 * h));
    }
    err
}
