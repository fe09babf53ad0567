use std::hint::black_box;

use blowup_bench::pde_problem;
use blowup_core::kernel::{GridSpec, KernelSpec, RadialProfile, SpectralOperator};
use blowup_core::nonlinearity::{classify, Nonlinearity};
use blowup_core::ode::{integrate, OdeBudget, OdeProblem};
use blowup_core::pde::{evolve, PdeBudget, PhiShape};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn spectral_apply(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_apply");
    for (n, points) in [(1u32, 4096usize), (2, 256)] {
        let grid = GridSpec::new(32.0, points).unwrap();
        let op = SpectralOperator::new(KernelSpec::new(1.5, n).unwrap(), grid).unwrap();
        let phi = PhiShape::Gaussian.field(grid, n, 1.0).unwrap();
        g.bench_with_input(BenchmarkId::new(format!("n{n}"), points), &phi, |b, phi| {
            b.iter(|| op.apply(black_box(phi), 0.5).unwrap())
        });
    }
    g.finish();
}

fn radial_profile(c: &mut Criterion) {
    c.bench_function("radial_profile_build", |b| {
        b.iter(|| RadialProfile::build(black_box(1.5), 1).unwrap())
    });
}

fn criterion_classify(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify");
    let cases = [
        ("power", Nonlinearity::power(3.0).unwrap()),
        ("log_corrected", Nonlinearity::log_corrected(2.0, 1, 1.5, 0.01).unwrap()),
    ];
    for (name, f) in &cases {
        g.bench_function(*name, |b| b.iter(|| classify(black_box(f), 2.0, 1).unwrap()));
    }
    g.finish();
}

fn ode_integrate(c: &mut Criterion) {
    let mut g = c.benchmark_group("ode_integrate");
    let budget = OdeBudget::default();
    for p in [2.0, 4.0] {
        let prob = OdeProblem::new(Nonlinearity::power(p).unwrap(), 2.0, 1, 1.0, 1.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(p), &prob, |b, prob| {
            b.iter(|| integrate(black_box(prob), &budget).unwrap())
        });
    }
    g.finish();
}

fn pde_evolve(c: &mut Criterion) {
    let prob = pde_problem(4.0, 2.0, 40.0, 1024, 0.1).unwrap();
    let budget = PdeBudget {
        t_max: 1.0,
        tol: 1e-8,
        ..PdeBudget::default()
    };
    let mut g = c.benchmark_group("pde_evolve");
    g.sample_size(20);
    g.bench_function("quartic_to_t1", |b| {
        b.iter(|| evolve(black_box(&prob), &budget).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    spectral_apply,
    radial_profile,
    criterion_classify,
    ode_integrate,
    pde_evolve
);
criterion_main!(benches);
