use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use otfs_scma::detectors::Algorithm;
use otfs_scma::exec::Execution;
use otfs_scma::simulator::{run_bound, run_sweep, BoundConfig, SimulationConfig};

fn base() -> SimulationConfig {
    SimulationConfig::from_json_str(
        r#"{"grid": {"m": 16, "n": 8, "delta_f": 15000, "cp_len": 16}, "powers_dbm": [10], "trials": 8, "seed": 1}"#,
    )
    .unwrap()
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, algorithm) in [("centralized", Algorithm::Centralized), ("decentralized", Algorithm::Decentralized)] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut cfg = base();
            cfg.detector.algorithm = algorithm;
            cfg.execution = exec;
            group.bench_with_input(BenchmarkId::new(name, format!("{exec:?}")), &cfg, |b, cfg| {
                b.iter(|| black_box(run_sweep(cfg).unwrap()))
            });
        }
    }
    group.finish();
}

fn bound(c: &mut Criterion) {
    let mut group = c.benchmark_group("bound");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = SimulationConfig {
            grid: otfs_scma::modem::OtfsGrid::new(4, 2, 15e3, 8).unwrap(),
            powers_dbm: vec![0.0, 10.0, 20.0],
            execution: exec,
            bound: BoundConfig { channel_draws: 8, pathloss_samples: 10_000, ..Default::default() },
            ..base()
        };
        group.bench_with_input(BenchmarkId::new("union_bound", format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| black_box(run_bound(cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, bound);
criterion_main!(benches);
