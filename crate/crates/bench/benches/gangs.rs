use criterion::{criterion_group, criterion_main};

criterion_group!(benches, gangs_bench::solver, gangs_bench::networks, gangs_bench::payoffs);
criterion_main!(benches);
