use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use llblow_core::flow::{seed_initial_data, FlowSolver};
use llblow_core::verify;
use llblow_core::{Coefficients, Exec, RadialGrid};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn checks(c: &mut Criterion) {
    let mut g = c.benchmark_group("checks");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("numerology", name), &exec, |b, &e| {
            b.iter(|| verify::check_numerology(7, 20_000, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("appendix_b", name), &exec, |b, &e| {
            b.iter(|| verify::check_appendix_b(e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("coercivity", name), &exec, |b, &e| {
            b.iter(|| verify::check_coercivity(7, 20.0, 40, e).unwrap())
        });
    }
    g.finish();
}

fn flow_steps(c: &mut Criterion) {
    let coeffs = Coefficients::derive(1.0, 1.0).unwrap();
    let mut g = c.benchmark_group("flow_steps");
    g.sample_size(10);
    for n in [4096usize, 16384] {
        let grid = Arc::new(RadialGrid::graded(1e-3, 2000.0, n, 1.01).unwrap());
        let field = seed_initial_data(&coeffs, 1.0, 0.0, 0.0, 0.05, &grid).unwrap();
        for (name, exec) in MODES {
            let solver = FlowSolver::new(field.clone(), coeffs, 0.25).unwrap().with_exec(exec);
            g.bench_with_input(BenchmarkId::new(name, n), &solver, |b, s| {
                b.iter_batched(
                    || s.clone(),
                    |mut s| {
                        for _ in 0..10 {
                            s.step().unwrap();
                        }
                        s
                    },
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    g.finish();
}

criterion_group!(benches, checks, flow_steps);
criterion_main!(benches);
