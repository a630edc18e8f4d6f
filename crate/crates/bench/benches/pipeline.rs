use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nisynth_bench::{example_closed_loop, example_interconnection, example_plant, example_spec, X0};
use nisynth_core::sim::{check_dissipation, integrate, Signal, SignalSpec};
use nisynth_core::ClosedLoopSystem;

fn rhs(c: &mut Criterion) {
    let cl = example_closed_loop();
    let ic = example_interconnection();
    let mut dx = [0.0; 4];
    c.bench_function("closed_loop_rhs", |b| {
        b.iter(|| cl.rhs(black_box(&X0), black_box(&[0.1, -0.2]), &mut dx))
    });
    let x = [3.0, 1.0, -1.0, 2.0, 0.5, -0.5];
    let mut dx = [0.0; 6];
    c.bench_function("interconnection_rhs", |b| {
        b.iter(|| ic.rhs(black_box(&x), &mut dx))
    });
}

fn synthesis(c: &mut Criterion) {
    c.bench_function("build_closed_loop", |b| {
        b.iter(|| {
            let plant = example_plant();
            let spec = example_spec(&plant);
            ClosedLoopSystem::new(plant, spec).unwrap()
        })
    });
    let cl = example_closed_loop();
    c.bench_function("symbolic_feedback_laws", |b| b.iter(|| cl.synthesize_feedback()));
}

fn simulation(c: &mut Criterion) {
    let cl = example_closed_loop();
    let mut g = c.benchmark_group("integrate_10s");
    g.sample_size(20);
    for dt in [1e-2, 1e-3] {
        g.bench_with_input(BenchmarkId::from_parameter(dt), &dt, |b, &dt| {
            b.iter(|| integrate(&cl, &X0, 10.0, dt, &Signal::zero(2)).unwrap())
        });
    }
    g.finish();

    let input = SignalSpec::Multisine {
        amplitudes: vec![vec![0.5, 0.25]],
        frequencies: vec![vec![1.0, 2.7]],
    }
    .realize(2, 0)
    .unwrap();
    let traj = integrate(&cl, &X0, 10.0, 1e-3, &input).unwrap();
    c.bench_function("check_dissipation_10k_steps", |b| {
        b.iter(|| check_dissipation(&traj, &|x| cl.storage_v(x), 1.0, 1e-3).unwrap())
    });
}

criterion_group!(benches, rhs, synthesis, simulation);
criterion_main!(benches);
