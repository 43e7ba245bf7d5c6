//! The data-parallel kernels on the default rayon pool and on a one-thread
//! pool. Build with `--no-default-features` for the plain sequential loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use phaseflow::oracles::{leapfrog_evolve, liouville_evolve, IntegratorConfig, LiouvilleConfig};
use phaseflow::states::{
    moments_from_ensemble, sample_ensemble, wigner_transform, Lattice, PhaseSpaceGrid, PositionGrid, WavefunctionGrid,
};
use phaseflow::{GaussianState, PolynomialPotential};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut out = vec![(
        "1-thread".to_string(),
        rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
    )];
    if all > 1 {
        out.push((
            format!("{all}-thread"),
            rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap(),
        ));
    }
    out
}

fn kernels(c: &mut Criterion) {
    let g = GaussianState::pure(1.0, 0.0, 0.5, 0.0, 1.0).unwrap();
    let quartic = PolynomialPotential::quartic(-1.0, 1.0, 1.0).unwrap();
    let ensemble = sample_ensemble(&g, 200_000, 1).unwrap();
    let wave = WavefunctionGrid::from_gaussian(&g, PositionGrid::centered(512, 0.0, 12.0).unwrap(), 1.0, 1.0).unwrap();
    let grid = PhaseSpaceGrid::from_gaussian(&g, Lattice::centered(256, 256, 1.0, 6.0, 0.0, 6.0).unwrap()).unwrap();
    let oscillator = PolynomialPotential::quadratic(1.0, 1.0).unwrap();
    let steps = IntegratorConfig::new(1e-3, 1e-2, 10).unwrap();
    let liouville = LiouvilleConfig::new(IntegratorConfig::new(1e-2, 5e-2, 5).unwrap());

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("ensemble-moments-200k", &name), &pool, |b, pool| {
            b.iter(|| pool.install(|| moments_from_ensemble(&ensemble, 4)))
        });
        group.bench_with_input(BenchmarkId::new("leapfrog-200k-x10", &name), &pool, |b, pool| {
            b.iter(|| pool.install(|| leapfrog_evolve(ensemble.clone(), &quartic, &steps, 1e3, |_, _| {}).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("wigner-512", &name), &pool, |b, pool| {
            b.iter(|| pool.install(|| wigner_transform(&wave).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("liouville-256sq-x5", &name), &pool, |b, pool| {
            b.iter(|| pool.install(|| liouville_evolve(grid.clone(), &oscillator, &liouville, |_, _| Ok(())).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
