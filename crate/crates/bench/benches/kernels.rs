use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use harmorse::family::{hopf_invariant, polygon_linking};
use harmorse::jacobi::{assemble, build_basis};
use harmorse::quadrature::Resolution;
use harmorse::{QuadratureGrid, SingularPolicy, Vector3};
use harmorse_bench::{grid, map, points, MAPS};

fn evaluate(c: &mut Criterion) {
    let pts = points(1024, 1);
    let mut g = c.benchmark_group("evaluate");
    for spec in MAPS {
        let u = map(spec);
        g.bench_with_input(BenchmarkId::from_parameter(spec), &u, |b, u| {
            b.iter(|| pts.iter().map(|x| u.evaluate(x).unwrap().energy_density()).sum::<f64>())
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let u = map("hopf");
    let mut g = c.benchmark_group("quadrature");
    g.sample_size(20);
    for (e, x) in [(12, 24), (24, 48)] {
        let grid = grid(e, x);
        g.bench_function(BenchmarkId::new("hopf-energy", format!("{e}x{x}x{x}")), |b| {
            b.iter(|| grid.integrate(|p| u.energy_density(p)).unwrap())
        });
    }
    let eq = map("equator(0.9,0,0)");
    let oriented = QuadratureGrid::for_map(Resolution::DEFAULT, &eq).unwrap();
    g.bench_function("equator-refine-3", |b| {
        b.iter(|| oriented.integrate_with(|p| eq.energy_density(p), SingularPolicy::Refine(3)).unwrap())
    });
    g.finish();
}

fn galerkin(c: &mut Criterion) {
    let u = map("hopf");
    let grid = grid(12, 24);
    let mut g = c.benchmark_group("assemble");
    g.sample_size(10);
    for n in [1, 2, 3] {
        let basis = build_basis(&u, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &basis, |b, basis| b.iter(|| assemble(basis, &grid).unwrap()));
    }
    g.finish();
}

fn topology(c: &mut Criterion) {
    let u = map("hopf");
    let n = Vector3::new(0.0, 0.0, 1.0);
    let mut g = c.benchmark_group("topology");
    g.sample_size(10);
    g.bench_function("hopf-invariant-mesh-6", |b| b.iter(|| hopf_invariant(&u, n, -n, 6).unwrap()));
    let circle = |k: usize, r: f64, shift: f64| -> Vec<Vector3<f64>> {
        (0..k)
            .map(|j| {
                let t = j as f64 * std::f64::consts::TAU / k as f64;
                Vector3::new(r * t.cos() + shift, r * t.sin(), 0.0)
            })
            .collect()
    };
    let a = circle(500, 1.0, 0.0);
    let b: Vec<Vector3<f64>> = circle(500, 1.0, 1.0).into_iter().map(|v| Vector3::new(v[0], 0.0, v[1])).collect();
    g.bench_function("segment-linking-500x500", |bch| bch.iter(|| polygon_linking(black_box(&a), black_box(&b))));
    g.finish();
}

criterion_group!(benches, evaluate, quadrature, galerkin, topology);
criterion_main!(benches);
