//! Benchmark bodies shared by `benches/gangs.rs`.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use gangs::gang::CommonSamples;
use gangs::matrix_game::{solve_zero_sum, EXACT_TOL};
use gangs::neural;
use gangs::seed::rng_from;
use gangs::synth::make_grid;
use gangs::{GangSpec, MeasuringFn, MlpSpec, NetworkParams, PayoffMatrix};
use ndarray::Array2;
use rand::Rng;

pub fn random_game(n: usize, seed: u64) -> PayoffMatrix {
    let mut rng = rng_from(seed, &[n as u64]);
    PayoffMatrix::from_flat(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_zero_sum");
    for n in [5, 20, 50] {
        let game = random_game(n, 0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &game, |b, g| b.iter(|| solve_zero_sum(black_box(g), EXACT_TOL).unwrap()));
    }
    group.finish();
}

pub fn networks(c: &mut Criterion) {
    let mut rng = rng_from(1, &[]);
    let spec = MlpSpec::default_classifier(2);
    let clf = NetworkParams::init(&spec, &mut rng);
    let x = Array2::from_shape_simple_fn((128, 2), || rng.random_range(-3.0..3.0));
    c.bench_function("classifier_forward_128", |b| b.iter(|| clf.forward(black_box(x.view())).unwrap()));
    c.bench_function("classifier_gradient_128", |b| {
        b.iter(|| neural::gradient(&clf, black_box(x.view()), |out| (out.sum(), Array2::ones(out.raw_dim()))).unwrap())
    });
}

pub fn payoffs(c: &mut Criterion) {
    let spec = GangSpec::with_defaults(make_grid(9, 2.0, 0.05).unwrap());
    let mut rng = rng_from(2, &[]);
    let gen = NetworkParams::init(&spec.generator, &mut rng);
    let clf = NetworkParams::init(&spec.classifier, &mut rng);
    let reals = spec.sample_real(10_000, &mut rng);
    let fakes = gen.forward(spec.noise.sample(10_000, &mut rng).view()).unwrap();
    let samples = CommonSamples { reals, fakes: vec![fakes] };
    let phi = MeasuringFn::default();
    c.bench_function("payoff_cell_10k", |b| b.iter(|| samples.cell(&phi, 0, black_box(&clf)).unwrap()));
}
