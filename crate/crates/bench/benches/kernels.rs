//! Timings for the matrix exponential, spectral radius and the perturbed construction.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semigroup_lab::operator::spectral_radius;
use semigroup_lab::probes::{random_positive_matrix, random_positive_triple};
use semigroup_lab::{construct_perturbed, expm, GridSpace, LinOp, NormKind, SpectralMethod, TheoremKind, TimeGrid};

fn generator(n: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    random_positive_matrix(&mut rng, n, n, 0.6) - DMatrix::identity(n, n) * (n as f64)
}

fn bench_expm(c: &mut Criterion) {
    let mut g = c.benchmark_group("expm");
    for n in [4, 16, 64] {
        let a = generator(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| expm(a)));
    }
    g.finish();
}

fn bench_spectral_radius(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_radius");
    for n in [8, 32, 64] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let op = LinOp::on(random_positive_matrix(&mut rng, n, n, 0.5), Arc::new(GridSpace::unit(n, NormKind::Sup)));
        g.bench_with_input(BenchmarkId::new("eigen", n), &op, |b, op| b.iter(|| spectral_radius(op, SpectralMethod::Eigen)));
        g.bench_with_input(BenchmarkId::new("gelfand", n), &op, |b, op| {
            b.iter(|| spectral_radius(op, SpectralMethod::Gelfand { n_max: 64 }))
        });
    }
    g.finish();
}

fn bench_construct(c: &mut Criterion) {
    let mut g = c.benchmark_group("construct_perturbed");
    g.sample_size(10);
    for n in [2, 6, 12] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let tr = random_positive_triple(&mut rng, n, 2, (0.2, 0.8), NormKind::Sup).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &tr, |b, tr| {
            b.iter(|| construct_perturbed(tr, TheoremKind::AM, TimeGrid::new(1e-2, 2.0), 1e-10).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_expm, bench_spectral_radius, bench_construct);
criterion_main!(benches);
