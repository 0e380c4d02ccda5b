use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kslab_bench::{bump_state, ftbu_model, quadrature_model};
use kslab_core::energetics::energy_record;
use kslab_core::solver::Stepper;
use kslab_core::{classify, scan_region, SolverConfig};

fn step(c: &mut Criterion) {
    let model = ftbu_model();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("step");
    for cells in [256, 2048] {
        let state = bump_state(cells);
        let mut stepper = Stepper::new(cells);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &cells, |b, _| {
            b.iter_batched_ref(
                || state.clone(),
                |s| stepper.step(s, &model, &cfg).expect("step"),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn energy(c: &mut Criterion) {
    let state = bump_state(2048);
    let closed = ftbu_model();
    let quad = quadrature_model();
    c.bench_function("energy/closed_form_2048", |b| b.iter(|| energy_record(black_box(&state), &closed)));
    c.bench_function("energy/quadrature_2048", |b| b.iter(|| energy_record(black_box(&state), &quad)));
}

fn g_eval(c: &mut Criterion) {
    let closed = ftbu_model();
    let quad = quadrature_model();
    c.bench_function("G/closed_form", |b| b.iter(|| closed.g(black_box(137.0))));
    c.bench_function("G/quadrature", |b| b.iter(|| quad.g(black_box(137.0))));
}

fn classification(c: &mut Criterion) {
    c.bench_function("classify/point", |b| b.iter(|| classify(black_box(3), black_box(0.8), black_box(0.6))));
    c.bench_function("classify/scan_101", |b| b.iter(|| scan_region(3, [-1.0, 2.0], [-1.0, 2.0], 101)));
}

criterion_group!(benches, step, energy, g_eval, classification);
criterion_main!(benches);
