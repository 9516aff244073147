//! Parallel vs sequential seed execution on a trimmed experiment.

use criterion::{criterion_group, criterion_main, Criterion};
use sfrl_core::envs::TaskSpec;
use sfrl_core::harness::{run_experiment_with, ExperimentConfig, Parallelism};

fn small_config() -> ExperimentConfig {
    let task = TaskSpec::builtin("A").unwrap();
    let mut cfg = ExperimentConfig::for_task(task);
    cfg.run.episodes = 10;
    cfg.run.episode_cap = 50;
    cfg.run.seeds = (0..8).collect();
    cfg
}

fn bench_seed_loop(c: &mut Criterion) {
    let cfg = small_config();
    let mut group = c.benchmark_group("seed_loop");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_experiment_with(&cfg, Parallelism::Sequential).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("rayon", |b| {
        b.iter(|| run_experiment_with(&cfg, Parallelism::Rayon { jobs: 0 }).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_seed_loop);
criterion_main!(benches);
