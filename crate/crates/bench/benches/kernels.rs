use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wallflux::besov::{besov_seminorm, dyadic_probes};
use wallflux::budget::{Budget, BudgetScales};
use wallflux::solver::{GridSpec, Projector, Scenario, Solver, SolverConfig};
use wallflux::{MollifierKernel, Region, ScalarField2};
use wallflux_bench::smooth_field;

fn mollifier(c: &mut Criterion) {
    let mut group = c.benchmark_group("mollify");
    for n in [64usize, 128] {
        let u = smooth_field(n, n + 1);
        let k = MollifierKernel::new(u.grid(), 0.2).unwrap();
        group.bench_with_input(BenchmarkId::new("commutator", n), &u, |b, u| {
            b.iter(|| k.cet_commutator(black_box(u), black_box(u)).unwrap())
        });
    }
    group.finish();
}

fn budget(c: &mut Criterion) {
    let u = smooth_field(128, 129);
    let p = ScalarField2::zeros(u.grid());
    let b = Budget::new(u.grid(), BudgetScales::euler(0.1, 0.9)).unwrap();
    c.bench_function("budget_fields_128", |bench| {
        bench.iter(|| b.fields(black_box(&u), Some(&p)).unwrap())
    });
}

fn projection(c: &mut Criterion) {
    let u = smooth_field(128, 129);
    let p = Projector::new(u.grid());
    c.bench_function("project_128", |b| {
        b.iter(|| p.project(black_box(&u)).unwrap())
    });
}

fn solver_step(c: &mut Criterion) {
    let cfg = SolverConfig {
        nu: 1e-3,
        dt: 1e-3,
        t_end: 1.0,
        grid: GridSpec {
            lx: 1.0,
            ly: 1.0,
            nx: 64,
            ny: 65,
        },
        scenario: Scenario::DipoleWall { amplitude: 1.0 },
        cadence: 1,
        cfl_limit: 0.5,
    };
    c.bench_function("solver_step_64", |b| {
        b.iter_batched(
            || Solver::new(cfg.clone()).unwrap(),
            |mut s| s.step().unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn structure(c: &mut Criterion) {
    let u = smooth_field(256, 129);
    let probes = dyadic_probes(u.grid(), 0..=5);
    let region = Region::full(u.grid());
    c.bench_function("besov_seminorm_256", |b| {
        b.iter(|| besov_seminorm(black_box(&u), 3.0, 1.0 / 3.0, &region, &probes).unwrap())
    });
}

criterion_group!(
    benches,
    mollifier,
    budget,
    projection,
    solver_step,
    structure
);
criterion_main!(benches);
