use std::hint::black_box;

use cqpaxos::consecutive::{detect_classic, detect_cq, detect_cq_oracle};
use cqpaxos::{Config, Mutant, Value, Variant};
use cqpaxos_bench::{gapped_history, staggered_history};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const X: Value = Value(0);

fn config(f: u32) -> Config {
    Config::new(f, 1, 1, vec!["x".into()], Variant::Cq, Mutant::None).unwrap()
}

fn detection(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect_cq");
    for (f, ballots) in [(1, 8), (2, 16), (3, 32), (4, 64)] {
        let cfg = config(f);
        let acceptors = (2 * f + 1) as u16;
        let hit = staggered_history(acceptors, ballots, X);
        let miss = gapped_history(acceptors, ballots, X);
        let label = format!("{acceptors}x{ballots}");
        group.bench_with_input(BenchmarkId::new("found", &label), &hit, |b, h| {
            b.iter(|| detect_cq(black_box(h), X, &cfg))
        });
        group.bench_with_input(BenchmarkId::new("absent", &label), &miss, |b, h| {
            b.iter(|| detect_cq(black_box(h), X, &cfg))
        });
        group.bench_with_input(BenchmarkId::new("classic", &label), &hit, |b, h| {
            b.iter(|| detect_classic(black_box(h), X, &cfg))
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let cfg = config(2);
    let h = gapped_history(4, 5, X);
    c.bench_function("detect_cq_oracle/4 acceptors", |b| b.iter(|| detect_cq_oracle(black_box(&h), X, &cfg)));
    c.bench_function("detect_cq/4 acceptors", |b| b.iter(|| detect_cq(black_box(&h), X, &cfg)));
}

criterion_group!(benches, detection, oracle);
criterion_main!(benches);
