//! Parallel versus sequential trial execution on a small phase grid.
//!
//! Build with `--no-default-features` to see the sequential fallback on both
//! rows.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use panm::experiments::{run_phase_transition, Execution, TrialConfig};
use panm::model::PilotGrid;

fn phase_grid(c: &mut Criterion) {
    let grid = PilotGrid::new(128, 16, 5e-6).unwrap();
    let base = TrialConfig::new(grid, 1, 1, 30.0, 0.3, 7);
    let mut group = c.benchmark_group("phase_2x2x4");
    group.sample_size(10);
    for (name, exec) in [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_phase_transition(&base, &[1, 2], &[0, 1], 4, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, phase_grid);
criterion_main!(benches);
