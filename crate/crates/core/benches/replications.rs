use batched_bandit::environment::{make_schedule, ScheduleSpec};
use batched_bandit::replicate::{run_replications, run_replications_sequential};
use batched_bandit::{validate_config, ConfigDraft};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn replications(c: &mut Criterion) {
    let cfg = validate_config(ConfigDraft::deployment_defaults()).unwrap();
    let env = make_schedule(ScheduleSpec::Stationary {
        means: vec![0.606, 0.580, 0.585],
        horizon: cfg.horizon(),
    })
    .unwrap();

    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for count in [16u64, 128] {
        group.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, &n| {
            b.iter(|| run_replications_sequential(&cfg, &env, n).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, &n| {
            b.iter(|| run_replications(&cfg, &env, n, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
