//! Plain alternating GAN training, the control for the PNM experiments.

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gang::{GangSpec, MeasuringFn};
use crate::neural::{self, NetworkParams, NeuralError, Optimizer, OptimizerConfig};
use crate::rbbr::{generator_step, LOG_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    /// `gen_opt.iterations` sets the number of rounds.
    pub gen_opt: OptimizerConfig,
    /// Its `iterations` is not used; the classifier takes `clf_steps` steps
    /// per round.
    pub clf_opt: OptimizerConfig,
    pub phi: MeasuringFn,
    pub clf_steps: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            gen_opt: OptimizerConfig::gan(),
            clf_opt: OptimizerConfig::gan(),
            phi: MeasuringFn::Log,
            clf_steps: 1,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        self.gen_opt.validate()?;
        self.clf_opt.validate()?;
        self.phi.validate()?;
        if self.clf_steps == 0 {
            return Err(Error::Invalid("clf_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Losses after one round: the classifier's last step and the generator step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanStep {
    pub step: usize,
    /// `−(E φ(C(x)) + E φ(1 − C(G(z))))`.
    pub clf_loss: f64,
    /// `−E φ(C(G(z)))`.
    pub gen_loss: f64,
}

#[derive(Debug, Clone)]
pub struct GanOutcome {
    pub gen: NetworkParams,
    pub clf: NetworkParams,
    pub history: Vec<GanStep>,
}

/// The original two-term classifier objective, negated.
fn classifier_loss(phi: &MeasuringFn, clf: &NetworkParams, reals: &Array2<f64>, fakes: &Array2<f64>) -> Result<(f64, Vec<f64>)> {
    let n_real = reals.nrows();
    let n_fake = fakes.nrows() as f64;
    let x = concatenate(Axis(0), &[reals.view(), fakes.view()]).map_err(|e| Error::Invalid(e.to_string()))?;
    neural::gradient(clf, x.view(), |out| {
        let mut d = Array2::zeros(out.raw_dim());
        let mut objective = 0.0;
        for (i, v) in out.column(0).iter().enumerate() {
            if i < n_real {
                let (val, _) = phi.value_and_slope(*v, LOG_FLOOR);
                objective += val / n_real as f64;
                d[[i, 0]] = -phi.ascent_slope(*v) / n_real as f64;
            } else {
                let (val, _) = phi.value_and_slope(1.0 - v, LOG_FLOOR);
                objective += val / n_fake;
                d[[i, 0]] = phi.ascent_slope(1.0 - v) / n_fake;
            }
        }
        (-objective, d)
    })
    .map_err(Into::into)
}

/// Alternates `clf_steps` classifier steps with one generator step; the
/// generator maximizes `E φ(C(G(z)))`.
pub fn train_gan<R: Rng + ?Sized>(spec: &GangSpec, cfg: &GanConfig, rng: &mut R) -> Result<GanOutcome> {
    cfg.validate()?;
    spec.validate()?;
    let mut gen = NetworkParams::init(&spec.generator, rng);
    let mut clf = NetworkParams::init(&spec.classifier, rng);
    let mut gen_opt = Optimizer::new(&cfg.gen_opt, gen.values().len());
    let mut clf_opt = Optimizer::new(&cfg.clf_opt, clf.values().len());
    let mut history = Vec::with_capacity(cfg.gen_opt.iterations);
    for step in 0..cfg.gen_opt.iterations {
        let mut clf_loss = 0.0;
        for _ in 0..cfg.clf_steps {
            let reals = spec.sample_real(cfg.clf_opt.batch_size, rng);
            let z = spec.noise.sample(cfg.clf_opt.batch_size, rng);
            let fakes = gen.forward(z.view())?;
            let (loss, grad) = classifier_loss(&cfg.phi, &clf, &reals, &fakes)?;
            check(step, loss, &grad)?;
            clf_opt.step(clf.values_mut(), &grad);
            clf_loss = loss;
        }
        let z = spec.noise.sample(cfg.gen_opt.batch_size, rng);
        let (gen_loss, grad) = generator_step(&cfg.phi, &gen, &[&clf], z.view())?;
        check(step, gen_loss, &grad)?;
        gen_opt.step(gen.values_mut(), &grad);
        history.push(GanStep { step, clf_loss, gen_loss });
    }
    Ok(GanOutcome { gen, clf, history })
}

fn check(step: usize, loss: f64, grad: &[f64]) -> Result<()> {
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(NeuralError::Diverged { iteration: step }.into());
    }
    Ok(())
}
