use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use socroute_bench::instance;
use socroute_core::{solve, ModelKind, ResourceModel, SolveOptions, SolverKind};

fn solvers(c: &mut Criterion) {
    let opts = SolveOptions::default();
    for kind in ModelKind::ALL {
        let mut group = c.benchmark_group(format!("solve/{}", kind.name()));
        for n in [10usize, 25, 50, 100] {
            let inst = instance(n, 17);
            let model = ResourceModel::for_instance(kind, &inst);
            for solver in [SolverKind::Labeling, SolverKind::Bnb] {
                group.bench_with_input(BenchmarkId::new(solver.name(), n), &inst, |b, inst| {
                    b.iter(|| solve(solver, black_box(inst), &model, &opts).unwrap())
                });
            }
        }
        let small = instance(10, 17);
        let model = ResourceModel::for_instance(kind, &small);
        group.bench_function(BenchmarkId::new("brute", 10), |b| {
            b.iter(|| solve(SolverKind::Brute, black_box(&small), &model, &opts).unwrap())
        });
        group.finish();
    }
}

criterion_group!(benches, solvers);
criterion_main!(benches);
