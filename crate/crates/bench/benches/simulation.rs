use airborne_bench::reduced_demo;
use airborne_core::{mutual_information, run_simulation_with_threads, DiscreteChannel};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn simulation(c: &mut Criterion) {
    let scenario = reduced_demo(0.2, 100);
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("demo_short_reduced", |b| {
        b.iter(|| run_simulation_with_threads(black_box(&scenario), 1).unwrap())
    });
    group.finish();

    let channel =
        DiscreteChannel::new(vec![0.9, 0.1], vec![vec![1.0, 0.0], vec![0.95, 0.05]]).unwrap();
    c.bench_function("mutual_information_2x2", |b| {
        b.iter(|| mutual_information(black_box(&channel)).unwrap())
    });
}

criterion_group!(benches, simulation);
criterion_main!(benches);
