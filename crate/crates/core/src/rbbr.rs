//! Resource-bounded best responses: a freshly initialized network trained by
//! gradient ascent on its own payoff against the opponent's mixture.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gang::{measured_mean, GangSpec, MeasuringFn, MixedNetStrategy};
use crate::neural::{self, NetworkParams, OptimizerConfig, Tape};

/// Floor applied when a plain log is used as the training measure.
pub const LOG_FLOOR: f64 = 1e-7;

/// Where the uniform-fake bounding box comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoxScope {
    /// Recomputed from every minibatch.
    #[default]
    Batch,
    /// Computed once per best-response call from a large reference sample.
    Call,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbbrConfig {
    pub opt: OptimizerConfig,
    pub phi: MeasuringFn,
    /// Classifiers drawn from the mixture per generator step.
    pub clf_subsample_count: usize,
    pub uniform_fakes: bool,
    /// Uniform fakes per batch; `None` means as many as the generated fakes.
    pub uniform_count: Option<usize>,
    pub uniform_box: BoxScope,
    /// Generator learning rate, replacing `opt.learning_rate` when set.
    pub gen_learning_rate: Option<f64>,
    /// Start each oracle from the player's newest strategy instead of a
    /// fresh initialization.
    pub warm_start: bool,
}

impl Default for RbbrConfig {
    fn default() -> Self {
        Self {
            opt: OptimizerConfig::rbbr(),
            phi: MeasuringFn::default(),
            clf_subsample_count: 5,
            uniform_fakes: true,
            uniform_count: None,
            uniform_box: BoxScope::Batch,
            gen_learning_rate: None,
            warm_start: false,
        }
    }
}

impl RbbrConfig {
    pub fn validate(&self) -> Result<()> {
        self.opt.validate()?;
        self.phi.validate()?;
        if self.clf_subsample_count == 0 {
            return Err(Error::Invalid("clf_subsample_count must be at least 1".into()));
        }
        if let Some(lr) = self.gen_learning_rate {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Invalid(format!("generator learning rate {lr} is invalid")));
            }
        }
        Ok(())
    }

    pub fn generator_opt(&self) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.gen_learning_rate.unwrap_or(self.opt.learning_rate),
            ..self.opt.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoundingBox {
    pub fn of(points: &[ArrayView2<'_, f64>]) -> Result<Self> {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for block in points {
            for row in block.rows() {
                any = true;
                for a in 0..2 {
                    min[a] = min[a].min(row[a]);
                    max[a] = max[a].max(row[a]);
                }
            }
        }
        if !any {
            return Err(Error::Invalid("bounding box of an empty point set".into()));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        (0..2).all(|a| self.min[a] <= other.min[a] && other.max[a] <= self.max[a])
    }

    /// Grows each side by `frac` of its extent (at least `floor`).
    pub fn padded(&self, frac: f64, floor: f64) -> Self {
        let mut out = *self;
        for a in 0..2 {
            let pad = ((self.max[a] - self.min[a]) * frac).max(floor);
            out.min[a] -= pad;
            out.max[a] += pad;
        }
        out
    }
}

/// Componentwise extremes over reals ∪ fakes.
pub fn bounding_box(reals: ArrayView2<'_, f64>, fakes: ArrayView2<'_, f64>) -> Result<BoundingBox> {
    BoundingBox::of(&[reals, fakes])
}

/// `n` i.i.d. uniform points in `bbox`.
pub fn sample_uniform_fakes<R: Rng + ?Sized>(bbox: &BoundingBox, n: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((n, 2));
    for mut row in out.rows_mut() {
        for a in 0..2 {
            let u: f64 = rng.random();
            row[a] = bbox.min[a] + u * (bbox.max[a] - bbox.min[a]);
        }
    }
    out
}

/// Loss `−(mean φ(C(reals)) − mean φ(C(fakes)))` and its parameter gradient.
///
/// The real term ascends with [`MeasuringFn::ascent_slope`]; the fake term
/// keeps the floor's flat region, so fakes already scored below the floor
/// stop pulling the classifier further into saturation.
fn classifier_step(phi: &MeasuringFn, clf: &NetworkParams, reals: ArrayView2<'_, f64>, fakes: ArrayView2<'_, f64>) -> Result<(f64, Vec<f64>)> {
    let n_real = reals.nrows();
    let n_fake = fakes.nrows();
    let x = concatenate(Axis(0), &[reals, fakes]).map_err(|e| Error::Invalid(e.to_string()))?;
    let (loss, grad) = neural::gradient(clf, x.view(), |out| {
        let mut d = Array2::zeros(out.raw_dim());
        let mut real_sum = 0.0;
        let mut fake_sum = 0.0;
        for (i, v) in out.column(0).iter().enumerate() {
            let (val, slope) = phi.value_and_slope(*v, LOG_FLOOR);
            if i < n_real {
                real_sum += val;
                d[[i, 0]] = -phi.ascent_slope(*v) / n_real as f64;
            } else {
                fake_sum += val;
                d[[i, 0]] = slope / n_fake as f64;
            }
        }
        (-(real_sum / n_real as f64 - fake_sum / n_fake as f64), d)
    })?;
    Ok((loss, grad))
}

/// Generator loss `−mean_k mean_z φ(C_k(G(z)))` with its ascent gradient,
/// back-propagated through every listed classifier.
pub(crate) fn generator_step(
    phi: &MeasuringFn,
    gen: &NetworkParams,
    clfs: &[&NetworkParams],
    z: ArrayView2<'_, f64>,
) -> Result<(f64, Vec<f64>)> {
    let tape: Tape = gen.forward_tape(z)?;
    let x = tape.output();
    let n = x.nrows() as f64;
    let k = clfs.len() as f64;
    let mut dx = Array2::zeros(x.raw_dim());
    let mut objective = 0.0;
    for clf in clfs {
        let ctape = clf.forward_tape(x.view())?;
        let mut d = Array2::zeros(ctape.output().raw_dim());
        for (i, v) in ctape.output().column(0).iter().enumerate() {
            let (val, _) = phi.value_and_slope(*v, LOG_FLOOR);
            objective += val / (n * k);
            d[[i, 0]] = -phi.ascent_slope(*v) / (n * k);
        }
        let (_, dxk) = ctape.backward(clf, d, false)?;
        dx += &dxk;
    }
    let (grad, _) = tape.backward(gen, dx, true)?;
    Ok((-objective, grad.unwrap()))
}

/// Trains a fresh classifier against the generator mixture.
pub fn train_classifier_rbbr<R: Rng + ?Sized>(spec: &GangSpec, gen_mix: &MixedNetStrategy, cfg: &RbbrConfig, rng: &mut R) -> Result<NetworkParams> {
    let init = NetworkParams::init(&spec.classifier, rng);
    train_classifier_rbbr_from(spec, gen_mix, cfg, init, rng)
}

/// [`train_classifier_rbbr`] starting from `init`.
pub fn train_classifier_rbbr_from<R: Rng + ?Sized>(
    spec: &GangSpec,
    gen_mix: &MixedNetStrategy,
    cfg: &RbbrConfig,
    init: NetworkParams,
    rng: &mut R,
) -> Result<NetworkParams> {
    cfg.validate()?;
    if init.spec() != &spec.classifier {
        return Err(Error::Invalid("initial classifier does not match the classifier architecture".into()));
    }
    let batch = cfg.opt.batch_size;
    let fixed_box = match (cfg.uniform_fakes, cfg.uniform_box) {
        (true, BoxScope::Call) => {
            let reals = spec.sample_real(10 * batch, rng);
            let fakes = gen_mix.generate(&spec.noise, 10 * batch, rng)?;
            Some(bounding_box(reals.view(), fakes.view())?)
        }
        _ => None,
    };
    neural::train(
        init,
        |clf, rng, _| {
            let reals = spec.sample_real(batch, rng);
            let fakes = gen_mix.generate(&spec.noise, batch, rng)?;
            if !cfg.uniform_fakes {
                return classifier_step(&cfg.phi, clf, reals.view(), fakes.view());
            }
            let bbox = match fixed_box {
                Some(b) => b,
                None => bounding_box(reals.view(), fakes.view())?,
            };
            let n_uniform = cfg.uniform_count.unwrap_or(fakes.nrows());
            let uniform = sample_uniform_fakes(&bbox, n_uniform, rng);
            let all = concatenate(Axis(0), &[fakes.view(), uniform.view()]).map_err(|e| Error::Invalid(e.to_string()))?;
            classifier_step(&cfg.phi, clf, reals.view(), all.view())
        },
        &cfg.opt,
        rng,
    )
}

/// Trains a fresh generator against the classifier mixture, sub-sampling
/// `clf_subsample_count` members per step.
pub fn train_generator_rbbr<R: Rng + ?Sized>(spec: &GangSpec, clf_mix: &MixedNetStrategy, cfg: &RbbrConfig, rng: &mut R) -> Result<NetworkParams> {
    let init = NetworkParams::init(&spec.generator, rng);
    train_generator_rbbr_from(spec, clf_mix, cfg, init, rng)
}

/// [`train_generator_rbbr`] starting from `init`.
pub fn train_generator_rbbr_from<R: Rng + ?Sized>(
    spec: &GangSpec,
    clf_mix: &MixedNetStrategy,
    cfg: &RbbrConfig,
    init: NetworkParams,
    rng: &mut R,
) -> Result<NetworkParams> {
    cfg.validate()?;
    if init.spec() != &spec.generator {
        return Err(Error::Invalid("initial generator does not match the generator architecture".into()));
    }
    let opt = cfg.generator_opt();
    neural::train(
        init,
        |gen, rng, _| {
            let picks: Vec<&NetworkParams> = (0..cfg.clf_subsample_count)
                .map(|_| &clf_mix.members()[clf_mix.pick(rng)])
                .collect();
            let z = spec.noise.sample(opt.batch_size, rng);
            generator_step(&cfg.phi, gen, &picks, z.view())
        },
        &opt,
        rng,
    )
}

/// The two best-response payoffs against the maintained mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPayoffs {
    /// `u_G(new generator, μ_C)`.
    pub gen_response: f64,
    /// `u_C(μ_G, new classifier)`.
    pub clf_response: f64,
}

impl TestPayoffs {
    /// `u_BRs`; at most zero certifies a resource-bounded equilibrium.
    pub fn total(&self) -> f64 {
        self.gen_response + self.clf_response
    }

    /// What `μ_G` earns against the new classifier.
    pub fn gen_mix_security(&self) -> f64 {
        -self.clf_response
    }

    /// What `μ_C` earns against the new generator.
    pub fn clf_mix_security(&self) -> f64 {
        -self.gen_response
    }
}

/// Monte Carlo `u_BRs` of a new generator/classifier pair against `(μ_G, μ_C)`.
///
/// Uses one real sample set for every classifier term.
pub fn u_brs<R: Rng + ?Sized>(
    spec: &GangSpec,
    gen_mix: &MixedNetStrategy,
    clf_mix: &MixedNetStrategy,
    new_gen: &NetworkParams,
    new_clf: &NetworkParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<TestPayoffs> {
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be at least 1".into()));
    }
    let reals = spec.sample_real(n_samples, rng);
    let new_fakes = MixedNetStrategy::pure(new_gen.clone()).generate(&spec.noise, n_samples, rng)?;
    let mix_fakes = gen_mix.generate(&spec.noise, n_samples, rng)?;
    let mut u_c_new_gen = 0.0;
    for (c, w) in clf_mix.members().iter().zip(clf_mix.weights().probs()) {
        if *w != 0.0 {
            u_c_new_gen += w * (measured_mean(&spec.phi, c, reals.view())? - measured_mean(&spec.phi, c, new_fakes.view())?);
        }
    }
    let clf_response = measured_mean(&spec.phi, new_clf, reals.view())? - measured_mean(&spec.phi, new_clf, mix_fakes.view())?;
    Ok(TestPayoffs {
        gen_response: -u_c_new_gen,
        clf_response,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gang::payoff_classifier_mc;
    use crate::matrix_game::MixedStrategy;
    use crate::neural::{Activation, MlpSpec};
    use crate::synth::make_grid;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn right_half_fraction(points: &Array2<f64>) -> f64 {
        points.column(0).iter().filter(|v| **v > 0.0).count() as f64 / points.nrows() as f64
    }

    fn spec() -> GangSpec {
        GangSpec::with_defaults(make_grid(9, 2.0, 0.05).unwrap())
    }

    fn quick(iterations: usize) -> RbbrConfig {
        RbbrConfig {
            opt: OptimizerConfig {
                iterations,
                batch_size: 64,
                ..OptimizerConfig::rbbr()
            },
            ..RbbrConfig::default()
        }
    }

    fn offset_generator(spec: &GangSpec, at: [f64; 2], rng: &mut ChaCha8Rng) -> NetworkParams {
        // Random hidden layers scaled down, output bias moved far away.
        let mut g = NetworkParams::init(&spec.generator, rng);
        let n = g.values().len();
        for v in g.values_mut().iter_mut() {
            *v *= 0.01;
        }
        g.values_mut()[n - 2] = at[0];
        g.values_mut()[n - 1] = at[1];
        g
    }

    #[test]
    fn bounding_box_examples() {
        let reals = array![[0.0, 0.0], [1.0, 2.0]];
        let fakes = array![[-1.0, 3.0]];
        let b = bounding_box(reals.view(), fakes.view()).unwrap();
        assert_eq!(b, BoundingBox { min: [-1.0, 0.0], max: [1.0, 3.0] });
        let single = array![[0.5, -0.5]];
        let empty = Array2::<f64>::zeros((0, 2));
        assert_eq!(
            bounding_box(single.view(), empty.view()).unwrap(),
            BoundingBox { min: [0.5, -0.5], max: [0.5, -0.5] }
        );
        assert!(b.contains(&bounding_box(reals.view(), empty.view()).unwrap()));
        assert!(bounding_box(empty.view(), empty.view()).is_err());
    }

    #[test]
    fn uniform_fakes_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = BoundingBox { min: [0.0, 0.0], max: [1.0, 1.0] };
        assert_eq!(sample_uniform_fakes(&b, 0, &mut rng).nrows(), 0);
        let p = BoundingBox { min: [2.0, -1.0], max: [2.0, -1.0] };
        assert!(sample_uniform_fakes(&p, 10, &mut rng).rows().into_iter().all(|r| r[0] == 2.0 && r[1] == -1.0));
        let n = 100_000;
        let u = sample_uniform_fakes(&b, n, &mut rng);
        let band = 4.0 / (12.0 * n as f64).sqrt();
        for a in 0..2 {
            assert!((u.column(a).sum() / n as f64 - 0.5).abs() <= band);
        }
    }

    #[test]
    fn zero_iterations_return_fresh_networks() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = NetworkParams::init(&s.generator, &mut rng);
        let c = NetworkParams::init(&s.classifier, &mut rng);
        let cfg = quick(0);
        let out = train_classifier_rbbr(&s, &MixedNetStrategy::pure(g.clone()), &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(out, NetworkParams::init(&s.classifier, &mut ChaCha8Rng::seed_from_u64(7)));
        let out = train_generator_rbbr(&s, &MixedNetStrategy::pure(c), &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(out, NetworkParams::init(&s.generator, &mut ChaCha8Rng::seed_from_u64(7)));
    }

    #[test]
    fn uniform_on_with_zero_count_matches_off() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = MixedNetStrategy::pure(NetworkParams::init(&s.generator, &mut rng));
        let off = RbbrConfig {
            uniform_fakes: false,
            ..quick(20)
        };
        let on_zero = RbbrConfig {
            uniform_fakes: true,
            uniform_count: Some(0),
            ..quick(20)
        };
        let a = train_classifier_rbbr(&s, &g, &off, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = train_classifier_rbbr(&s, &g, &on_zero, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let on = quick(20);
        let c = train_classifier_rbbr(&s, &g, &on, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn classifier_rbbr_beats_constant_classifier() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let far = MixedNetStrategy::pure(offset_generator(&s, [8.0, 8.0], &mut rng));
        let c = train_classifier_rbbr(&s, &far, &quick(150), &mut rng).unwrap();
        let u = payoff_classifier_mc(&s, &far, &c, 4000, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        let half = NetworkParams::zeros(s.classifier.clone());
        let u_half = payoff_classifier_mc(&s, &far, &half, 4000, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_eq!(u_half, 0.0);
        assert!(u > u_half + 1.0, "trained classifier payoff {u}");
    }

    #[test]
    fn generator_rbbr_moves_into_real_half_plane() {
        let s = spec();
        // C(x) = σ(4x): the right half-plane is scored as real.
        let clf_spec = MlpSpec::new(vec![2, 1], vec![Activation::Sigmoid]).unwrap();
        let clf = NetworkParams::new(clf_spec.clone(), vec![4.0, 0.0, 0.0]).unwrap();
        let mut s2 = s.clone();
        s2.classifier = clf_spec;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = train_generator_rbbr(&s2, &MixedNetStrategy::pure(clf), &quick(300), &mut rng).unwrap();
        let pts = MixedNetStrategy::pure(g).generate(&s2.noise, 5000, &mut rng).unwrap();
        assert!(right_half_fraction(&pts) >= 0.95);
    }

    #[test]
    fn singleton_mixture_is_the_pure_opponent() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = NetworkParams::init(&s.classifier, &mut rng);
        let single = MixedNetStrategy::pure(c.clone());
        let explicit = MixedNetStrategy::new(vec![c], MixedStrategy::new(vec![1.0]).unwrap()).unwrap();
        let a = train_generator_rbbr(&s, &single, &quick(15), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = train_generator_rbbr(&s, &explicit, &quick(15), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracles_are_deterministic() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = MixedNetStrategy::pure(NetworkParams::init(&s.generator, &mut rng));
        let a = train_classifier_rbbr(&s, &g, &quick(10), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = train_classifier_rbbr(&s, &g, &quick(10), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_play_tests_are_near_zero() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = NetworkParams::init(&s.generator, &mut rng);
        let c = train_classifier_rbbr(&s, &MixedNetStrategy::pure(g.clone()), &quick(50), &mut rng).unwrap();
        let t = u_brs(
            &s,
            &MixedNetStrategy::pure(g.clone()),
            &MixedNetStrategy::pure(c.clone()),
            &g,
            &c,
            20_000,
            &mut rng,
        )
        .unwrap();
        assert!(t.total().abs() < 0.1, "u_BRs {}", t.total());
        assert_eq!(t.gen_mix_security(), -t.clf_response);
    }

    #[test]
    fn generator_objective_gradient_matches_finite_differences() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let small = MlpSpec::new(vec![2, 5, 2], vec![Activation::Tanh, Activation::Linear]).unwrap();
        let g = NetworkParams::init(&small, &mut rng);
        let c1 = NetworkParams::init(&MlpSpec::new(vec![2, 4, 1], vec![Activation::Tanh, Activation::Sigmoid]).unwrap(), &mut rng);
        let c2 = NetworkParams::init(c1.spec(), &mut rng);
        let z = s.noise.sample(7, &mut rng);
        let phi = MeasuringFn::Identity;
        let (_, grad) = generator_step(&phi, &g, &[&c1, &c2], z.view()).unwrap();
        let h = 1e-6;
        for k in 0..g.values().len() {
            let mut p = g.clone();
            p.values_mut()[k] += h;
            let (lp, _) = generator_step(&phi, &p, &[&c1, &c2], z.view()).unwrap();
            p.values_mut()[k] -= 2.0 * h;
            let (lm, _) = generator_step(&phi, &p, &[&c1, &c2], z.view()).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }
}
