//! The GANG tuple and its induced zero-sum payoffs.
//!
//! The classifier's payoff is `u_C = E_x[φ(C(x))] − E_z[φ(C(G(z)))]` and the
//! generator's is always its negation; `u_G` is never estimated separately.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_game::MixedStrategy;
use crate::neural::{Activation, MlpSpec, NetworkParams};
use crate::synth::{GaussianMixture, MixtureSpec, NoiseDist};

pub const DEFAULT_DELTA: f64 = 1e-5;
pub const DEFAULT_CELL_SAMPLES: usize = 10_000;

/// Maps classifier outputs in `[0, 1]` to payoff units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasuringFn {
    Log,
    /// `ln(clamp(v, delta, 1))`.
    BoundedLog { delta: f64 },
    Identity,
}

impl Default for MeasuringFn {
    fn default() -> Self {
        MeasuringFn::BoundedLog { delta: DEFAULT_DELTA }
    }
}

impl MeasuringFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MeasuringFn::BoundedLog { delta } if !(delta > 0.0 && delta < 0.5) => {
                Err(Error::Invalid(format!("bounded log delta must lie in (0, 0.5), got {delta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn measure(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Invalid(format!("measuring function argument {v} outside [0, 1]")));
        }
        match *self {
            MeasuringFn::Log if v == 0.0 => Err(Error::LogOfZero),
            MeasuringFn::Log => Ok(v.ln()),
            MeasuringFn::BoundedLog { delta } => Ok(v.max(delta).ln()),
            MeasuringFn::Identity => Ok(v),
        }
    }

    /// `(φ(v), φ'(v))` for training. A plain log is floored at `log_floor`.
    pub fn value_and_slope(&self, v: f64, log_floor: f64) -> (f64, f64) {
        let clamped = |floor: f64| {
            if v > floor {
                (v.ln(), 1.0 / v)
            } else {
                (floor.ln(), 0.0)
            }
        };
        match *self {
            MeasuringFn::Log => clamped(log_floor),
            MeasuringFn::BoundedLog { delta } => clamped(delta),
            MeasuringFn::Identity => (v, 1.0),
        }
    }

    /// Slope used for terms a trainer wants to increase. The floored logs
    /// are flat below their floor, which would strand a network whose
    /// outputs are confidently wrong; these terms take the plain log's
    /// slope everywhere instead.
    pub fn ascent_slope(&self, v: f64) -> f64 {
        match *self {
            MeasuringFn::Log | MeasuringFn::BoundedLog { .. } => 1.0 / v.max(f64::MIN_POSITIVE),
            MeasuringFn::Identity => 1.0,
        }
    }

    /// Mean of φ over a column of classifier outputs.
    pub fn mean(&self, outputs: &Array2<f64>) -> Result<f64> {
        let n = outputs.nrows();
        if n == 0 {
            return Err(Error::Invalid("empty sample".into()));
        }
        let mut acc = 0.0;
        for v in outputs.column(0) {
            if !v.is_finite() {
                return Err(Error::NonFinite("classifier output".into()));
            }
            acc += self.measure(*v)?;
        }
        Ok(acc / n as f64)
    }
}

/// The tuple ⟨data distribution, ⟨G, noise⟩, C, φ⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct GangSpec {
    pub data: GaussianMixture,
    pub noise: NoiseDist,
    pub generator: MlpSpec,
    pub classifier: MlpSpec,
    pub phi: MeasuringFn,
}

impl GangSpec {
    pub fn new(data: GaussianMixture, noise: NoiseDist, generator: MlpSpec, classifier: MlpSpec, phi: MeasuringFn) -> Result<Self> {
        let spec = Self {
            data,
            noise,
            generator,
            classifier,
            phi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default networks, standard-normal noise, bounded log.
    pub fn with_defaults(data: GaussianMixture) -> Self {
        let d = data.dim();
        Self {
            data,
            noise: NoiseDist::StandardNormal { dim: 2 },
            generator: MlpSpec::default_generator(2, d),
            classifier: MlpSpec::default_classifier(d),
            phi: MeasuringFn::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.classifier.validate()?;
        self.phi.validate()?;
        if self.generator.output_width() != self.data.dim() {
            return Err(Error::Invalid(format!(
                "generator emits {} values, data points have {}",
                self.generator.output_width(),
                self.data.dim()
            )));
        }
        if self.generator.input_width() != self.noise.dim() {
            return Err(Error::Invalid("generator input width must equal noise dimension".into()));
        }
        if self.generator.output_activation() != Activation::Linear {
            return Err(Error::Invalid("generator output layer must be linear".into()));
        }
        if self.classifier.input_width() != self.data.dim()
            || self.classifier.output_width() != 1
            || self.classifier.output_activation() != Activation::Sigmoid
        {
            return Err(Error::Invalid("classifier must map data points to one sigmoid output".into()));
        }
        Ok(())
    }

    pub fn sample_real<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        self.data.sample(n, rng)
    }
}

/// Config-file form of the network side of a [`GangSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GangSection {
    pub generator: MlpSpec,
    pub classifier: MlpSpec,
    pub noise: NoiseDist,
    pub phi: MeasuringFn,
}

impl Default for GangSection {
    fn default() -> Self {
        Self {
            generator: MlpSpec::default_generator(2, 2),
            classifier: MlpSpec::default_classifier(2),
            noise: NoiseDist::default(),
            phi: MeasuringFn::default(),
        }
    }
}

impl GangSection {
    pub fn build(&self, data: &MixtureSpec) -> Result<GangSpec> {
        GangSpec::new(data.build()?, self.noise, self.generator.clone(), self.classifier.clone(), self.phi)
    }
}

/// A mixture over pure network strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedNetStrategy {
    members: Vec<NetworkParams>,
    weights: MixedStrategy,
}

impl MixedNetStrategy {
    pub fn new(members: Vec<NetworkParams>, weights: MixedStrategy) -> Result<Self> {
        if members.is_empty() || members.len() != weights.len() {
            return Err(Error::Invalid(format!(
                "{} members with {} weights",
                members.len(),
                weights.len()
            )));
        }
        Ok(Self { members, weights })
    }

    pub fn pure(member: NetworkParams) -> Self {
        Self {
            members: vec![member],
            weights: MixedStrategy::pure(1, 0),
        }
    }

    /// Mixture over the support of `weights` only.
    pub fn from_support(all: &[NetworkParams], weights: &MixedStrategy) -> Result<Self> {
        let idx: Vec<usize> = weights.support().collect();
        let members = idx.iter().map(|&i| all[i].clone()).collect();
        let w = MixedStrategy::normalized(idx.iter().map(|&i| weights.probs()[i]).collect())?;
        Self::new(members, w)
    }

    pub fn members(&self) -> &[NetworkParams] {
        &self.members
    }

    pub fn weights(&self) -> &MixedStrategy {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Draws a member index proportionally to the weights.
    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.members.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.probs().iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.probs().iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// `n` generator samples, choosing a member per draw.
    ///
    /// Member choices are drawn first, then each member's noise in index
    /// order; rows come out grouped by member.
    pub fn generate<R: Rng + ?Sized>(&self, noise: &NoiseDist, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        let mut counts = vec![0usize; self.members.len()];
        for _ in 0..n {
            counts[self.pick(rng)] += 1;
        }
        let width = self.members[0].spec().output_width();
        let mut out = Array2::zeros((n, width));
        let mut row = 0;
        for (member, &c) in self.members.iter().zip(&counts) {
            if c == 0 {
                continue;
            }
            let z = noise.sample(c, rng);
            let x = member.forward(z.view())?;
            out.slice_mut(ndarray::s![row..row + c, ..]).assign(&x);
            row += c;
        }
        Ok(out)
    }

    /// Weighted average of member outputs, `Σ w_k C_k(x)`.
    pub fn classify(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let mut acc = Array1::zeros(x.nrows());
        for (member, w) in self.members.iter().zip(self.weights.probs()) {
            if *w == 0.0 {
                continue;
            }
            let out = member.forward(x)?;
            acc.scaled_add(*w, &out.column(0));
        }
        Ok(acc)
    }
}

/// `E[φ(C(x))]` over the given points.
pub fn measured_mean(phi: &MeasuringFn, clf: &NetworkParams, points: ArrayView2<'_, f64>) -> Result<f64> {
    phi.mean(&clf.forward(points)?)
}

/// Monte Carlo estimate of `u_C(μ_G, C)` from `n_samples` real and fake points.
pub fn payoff_classifier_mc<R: Rng + ?Sized>(
    spec: &GangSpec,
    gen_mix: &MixedNetStrategy,
    clf: &NetworkParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be at least 1".into()));
    }
    let reals = spec.sample_real(n_samples, rng);
    let fakes = gen_mix.generate(&spec.noise, n_samples, rng)?;
    Ok(measured_mean(&spec.phi, clf, reals.view())? - measured_mean(&spec.phi, clf, fakes.view())?)
}

/// `u_G = −u_C`.
pub fn payoff_generator_mc<R: Rng + ?Sized>(
    spec: &GangSpec,
    gen_mix: &MixedNetStrategy,
    clf: &NetworkParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(-payoff_classifier_mc(spec, gen_mix, clf, n_samples, rng)?)
}

/// One payoff-matrix entry: `u_C` of a pure generator/classifier pair.
pub fn simulate_cell<R: Rng + ?Sized>(
    spec: &GangSpec,
    gen: &NetworkParams,
    clf: &NetworkParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    payoff_classifier_mc(spec, &MixedNetStrategy::pure(gen.clone()), clf, n_samples, rng)
}

/// Fixed sample sets for common-random-number payoff estimates.
///
/// One real set is shared by every classifier and each generator keeps its
/// own fake set, so `u_C(i, j) = real_term(j) − fake_term(i, j)` and every
/// mixture payoff is exactly linear in the cell values.
#[derive(Debug, Clone)]
pub struct CommonSamples {
    pub reals: Array2<f64>,
    pub fakes: Vec<Array2<f64>>,
}

impl CommonSamples {
    pub fn real_term(&self, phi: &MeasuringFn, clf: &NetworkParams) -> Result<f64> {
        measured_mean(phi, clf, self.reals.view())
    }

    pub fn fake_term(&self, phi: &MeasuringFn, gen: usize, clf: &NetworkParams) -> Result<f64> {
        measured_mean(phi, clf, self.fakes[gen].view())
    }

    pub fn cell(&self, phi: &MeasuringFn, gen: usize, clf: &NetworkParams) -> Result<f64> {
        Ok(self.real_term(phi, clf)? - self.fake_term(phi, gen, clf)?)
    }

    /// `u_C(Σ w_g G_g, C)` estimated on the per-generator sets.
    pub fn mixture_payoff(&self, phi: &MeasuringFn, gen_weights: &MixedStrategy, clf: &NetworkParams) -> Result<f64> {
        let mut fake = 0.0;
        for (g, w) in gen_weights.probs().iter().enumerate() {
            if *w != 0.0 {
                fake += w * self.fake_term(phi, g, clf)?;
            }
        }
        Ok(self.real_term(phi, clf)? - fake)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::make_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> GangSpec {
        GangSpec::with_defaults(make_grid(9, 2.0, 0.05).unwrap())
    }

    /// Classifier that is exactly 1 near the origin region and exactly 0 at
    /// (100, 100): `σ(1000 · (100 − x − y))`.
    fn separating_classifier() -> NetworkParams {
        let s = MlpSpec::new(vec![2, 1], vec![Activation::Sigmoid]).unwrap();
        NetworkParams::new(s, vec![-1000.0, -1000.0, 100_000.0]).unwrap()
    }

    fn constant_generator(at: [f64; 2]) -> NetworkParams {
        let s = MlpSpec::new(vec![2, 2], vec![Activation::Linear]).unwrap();
        NetworkParams::new(s, vec![0.0, 0.0, 0.0, 0.0, at[0], at[1]]).unwrap()
    }

    fn small_spec() -> GangSpec {
        let mut s = spec();
        s.generator = MlpSpec::new(vec![2, 2], vec![Activation::Linear]).unwrap();
        s.classifier = MlpSpec::new(vec![2, 1], vec![Activation::Sigmoid]).unwrap();
        s
    }

    #[test]
    fn measure_examples() {
        assert_eq!(MeasuringFn::Log.measure(1.0).unwrap(), 0.0);
        let b = MeasuringFn::BoundedLog { delta: 1e-5 };
        assert_eq!(b.measure(0.0).unwrap(), (1e-5f64).ln());
        assert!((b.measure(0.0).unwrap() + 11.512925).abs() < 1e-6);
        assert_eq!(MeasuringFn::Identity.measure(0.37).unwrap(), 0.37);
        assert!(matches!(MeasuringFn::Log.measure(0.0), Err(Error::LogOfZero)));
        assert!(MeasuringFn::Identity.measure(1.5).is_err());
        assert!(MeasuringFn::BoundedLog { delta: 0.7 }.validate().is_err());
    }

    #[test]
    fn measure_is_monotone() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        for phi in [MeasuringFn::BoundedLog { delta: 1e-5 }, MeasuringFn::Identity, MeasuringFn::Log] {
            let vals: Vec<f64> = grid.iter().skip(1).map(|v| phi.measure(*v).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn bounded_log_approaches_log() {
        for v in [1e-6, 1e-4, 0.01, 0.3, 0.9, 1.0] {
            let errs: Vec<f64> = [1e-3, 1e-5, 1e-8]
                .iter()
                .map(|d| (MeasuringFn::BoundedLog { delta: *d }.measure(v).unwrap() - v.ln()).abs())
                .collect();
            assert!(errs.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(*errs.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_classifier_gives_zero_payoff() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gen = NetworkParams::init(&s.generator, &mut rng);
        let clf = NetworkParams::zeros(s.classifier.clone());
        let u = simulate_cell(&s, &gen, &clf, 500, &mut rng).unwrap();
        assert_eq!(u, 0.0);
        let mut id = s.clone();
        id.phi = MeasuringFn::Identity;
        let mut c = NetworkParams::zeros(s.classifier.clone());
        *c.values_mut().last_mut().unwrap() = 0.8;
        assert_eq!(simulate_cell(&id, &gen, &c, 500, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn perfect_classifier_hits_bound() {
        let s = small_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = simulate_cell(&s, &constant_generator([100.0, 100.0]), &separating_classifier(), 1000, &mut rng).unwrap();
        let expected = 0.0 - MeasuringFn::BoundedLog { delta: 1e-5 }.measure(0.0).unwrap();
        assert!((u - expected).abs() <= 1e-9, "{u} vs {expected}");
        assert!((u - 11.512925).abs() < 1e-6);
        let ug = payoff_generator_mc(&s, &MixedNetStrategy::pure(constant_generator([100.0, 100.0])), &separating_classifier(), 1000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(u + ug, 0.0);
    }

    #[test]
    fn cell_matches_singleton_mixture_and_is_seeded() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gen = NetworkParams::init(&s.generator, &mut rng);
        let clf = NetworkParams::init(&s.classifier, &mut rng);
        let a = simulate_cell(&s, &gen, &clf, 2000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = payoff_classifier_mc(&s, &MixedNetStrategy::pure(gen.clone()), &clf, 2000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let c = simulate_cell(&s, &gen, &clf, 2000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, c);
        assert!(simulate_cell(&s, &gen, &clf, 0, &mut rng).is_err());
    }

    #[test]
    fn mixture_payoff_is_linear_under_common_samples() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gens: Vec<NetworkParams> = (0..4).map(|_| NetworkParams::init(&s.generator, &mut rng)).collect();
        let clf = NetworkParams::init(&s.classifier, &mut rng);
        let samples = CommonSamples {
            reals: s.sample_real(3000, &mut rng),
            fakes: gens
                .iter()
                .map(|g| MixedNetStrategy::pure(g.clone()).generate(&s.noise, 3000, &mut rng).unwrap())
                .collect(),
        };
        let w = MixedStrategy::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mix = samples.mixture_payoff(&s.phi, &w, &clf).unwrap();
        let lin: f64 = (0..4).map(|g| w.probs()[g] * samples.cell(&s.phi, g, &clf).unwrap()).sum();
        assert!((mix - lin).abs() <= 1e-9);
    }

    #[test]
    fn mixture_classify_is_weighted_average() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = NetworkParams::init(&s.classifier, &mut rng);
        let b = NetworkParams::init(&s.classifier, &mut rng);
        let x = s.sample_real(50, &mut rng);
        let mix = MixedNetStrategy::new(vec![a.clone(), b.clone()], MixedStrategy::new(vec![0.25, 0.75]).unwrap()).unwrap();
        let got = mix.classify(x.view()).unwrap();
        let fa = a.forward(x.view()).unwrap();
        let fb = b.forward(x.view()).unwrap();
        for i in 0..50 {
            assert!((got[i] - (0.25 * fa[[i, 0]] + 0.75 * fb[[i, 0]])).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&got[i]));
        }
    }

    #[test]
    fn spec_validation_catches_mismatches() {
        let mut s = spec();
        s.classifier = MlpSpec::relu_mlp(2, &[8], 1, Activation::Linear).unwrap();
        assert!(s.validate().is_err());
        let mut s = spec();
        s.generator = MlpSpec::relu_mlp(2, &[8], 3, Activation::Linear).unwrap();
        assert!(s.validate().is_err());
        assert!(MixedNetStrategy::new(vec![], MixedStrategy::uniform(1)).is_err());
    }
}
