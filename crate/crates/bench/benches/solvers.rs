use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use twistshear::algebra2d::{winding_index, PlanarCurve, Vec2};
use twistshear::penalty::PenaltyFunction;
use twistshear::shear_strong::solve_mixed_bvp;
use twistshear::shear_weak::{compose_minimizer, harmonic_solve};
use twistshear::twist_explicit::{solve_winding_params, AnnulusSpec};
use twistshear::twist_penalized::{shoot, ShootOptions};

fn twist(c: &mut Criterion) {
    let spec = AnnulusSpec::new(1.0, 2.0).unwrap();
    c.bench_function("explicit_params_N3", |b| b.iter(|| solve_winding_params(black_box(&spec), 3).unwrap()));
    let h = PenaltyFunction::default_penalty();
    let opts = ShootOptions::default();
    c.bench_function("penalized_shoot_N1", |b| b.iter(|| shoot(black_box(&spec), 1, &h, &opts).unwrap()));
}

fn shear(c: &mut Criterion) {
    let mut g = c.benchmark_group("shear");
    g.sample_size(10);
    g.bench_function("weak_n64", |b| b.iter(|| compose_minimizer(&harmonic_solve(black_box(64), 1e-13).unwrap())));
    let h = PenaltyFunction::default_penalty();
    g.bench_function("strong_n32", |b| b.iter(|| solve_mixed_bvp(black_box(32), &h, 1e-9).unwrap()));
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let pts: Vec<Vec2> = (0..512).map(|i| Vec2::e_r(3.0 * 2.0 * PI * i as f64 / 512.0)).collect();
    let curve = PlanarCurve::from_open(pts).unwrap();
    c.bench_function("winding_512", |b| b.iter(|| winding_index(black_box(&curve)).unwrap()));
}

criterion_group!(benches, twist, shear, kernel);
criterion_main!(benches);
