use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lidskii_core::abel::HFamily;
use lidskii_core::contour::default_varsigma;
use lidskii_core::expm::expm;
use lidskii_core::fixtures::{admissible_phi, generate_kind, phi_corpus, FixtureKind};
use lidskii_core::jordan::{extract_root_system, DEFAULT_EXTRACT_TOL};
use lidskii_core::{build_contour, solve_cauchy_with, Complex64, ContourIntegrator, SolveOptions};

fn h_family(c: &mut Criterion) {
    let mut g = c.benchmark_group("h_family");
    let z = Complex64::from_polar(1.3, 0.2);
    for (name, phi) in phi_corpus() {
        let fam = HFamily::new(&phi, 8).unwrap();
        g.bench_function(name, |b| b.iter(|| fam.eval_all(black_box(z), 0.5).unwrap()));
    }
    g.finish();
}

fn linear_algebra(c: &mut Criterion) {
    let mut g = c.benchmark_group("linear_algebra");
    for dim in [8, 32] {
        let f = generate_kind(FixtureKind::JordanMixed, dim, 1).unwrap();
        g.bench_with_input(BenchmarkId::new("extract_root_system", dim), &f, |b, f| {
            b.iter(|| extract_root_system(black_box(&f.b), DEFAULT_EXTRACT_TOL).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("expm", dim), &f, |b, f| b.iter(|| expm(black_box(f.b.matrix()))));
    }
    g.finish();
}

fn evolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolution");
    for dim in [4, 12] {
        let f = generate_kind(FixtureKind::SectorialRandom, dim, 2).unwrap();
        let (_, phi) = admissible_phi(f.theta, 2).unwrap();
        let vs = default_varsigma(f.theta, &phi);
        let spec = build_contour(&f.b, &phi, f.theta, vs, 0.01, 1e-12).unwrap();
        let h = f.unit_h(0);
        let sol = solve_cauchy_with(&f.b, &f.sys, &phi, &h, &spec, &SolveOptions::default()).unwrap();
        let integ = ContourIntegrator::new(&f.b, &phi, &spec);
        g.bench_function(BenchmarkId::new("build_contour", dim), |b| {
            b.iter(|| build_contour(black_box(&f.b), &phi, f.theta, vs, 0.01, 1e-12).unwrap())
        });
        g.bench_function(BenchmarkId::new("series", dim), |b| b.iter(|| sol.evaluate(black_box(0.1)).unwrap()));
        g.bench_function(BenchmarkId::new("contour_integral", dim), |b| {
            b.iter(|| integ.evolution_integral(black_box(&h), 0.1, 1e-10).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, h_family, linear_algebra, evolution);
criterion_main!(benches);
