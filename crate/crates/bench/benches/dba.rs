use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sginit_bench::fixture;
use sginit_core::dba::{build_normal_equations, optimize, schur_solve};
use sginit_core::geometry::reproject_flow;
use sginit_core::synth::make_provider;

const SIZES: [(usize, usize); 2] = [(24, 16), (48, 32)];

fn bench_reproject_flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("reproject_flow");
    for (w, h) in SIZES {
        let f = fixture(w, h, 2);
        let g = f.state.relative((0, 1));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{w}x{h}")), &f, |b, f| {
            b.iter(|| reproject_flow(&f.state.intrinsics, &g, &f.state.inv_depths[0]).unwrap())
        });
    }
    group.finish();
}

fn bench_normal_equations(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_normal_equations");
    for (w, h) in SIZES {
        let f = fixture(w, h, 8);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{w}x{h}")), &f, |b, f| {
            b.iter(|| build_normal_equations(&f.state, &f.graph, &f.targets, 1e-4).unwrap())
        });
    }
    group.finish();
}

fn bench_schur_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("schur_solve");
    for (w, h) in SIZES {
        let f = fixture(w, h, 8);
        let system = build_normal_equations(&f.state, &f.graph, &f.targets, 1e-4).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{w}x{h}")), &system, |b, s| {
            b.iter(|| schur_solve(s, 1).unwrap())
        });
    }
    group.finish();
}

fn bench_optimize(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    for (w, h) in SIZES {
        let f = fixture(w, h, 8);
        let provider = make_provider(&f.seq, f.scenario.provider).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{w}x{h}")), &f, |b, f| {
            b.iter(|| optimize(&f.state, &f.graph, &provider, &f.scenario.solver).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_reproject_flow, bench_normal_equations, bench_schur_solve, bench_optimize);
criterion_main!(benches);
