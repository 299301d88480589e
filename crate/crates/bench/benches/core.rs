use std::hint::black_box;

use baitshell_bench::{random_game, synthetic_log};
use baitshell_core::analysis::build_report;
use baitshell_core::log::{parse_log, sessions_from_events, ParseMode};
use baitshell_core::solver::{fixture, iterated_elimination, logit_qre_trace, solve, QreOptions, DEFAULT_EPSILON};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn solver(c: &mut Criterion) {
    let game = fixture::builtin_game();
    let opts = QreOptions::default();
    c.bench_function("solve builtin", |b| b.iter(|| solve(black_box(&game), &opts, DEFAULT_EPSILON).unwrap()));

    let nf = random_game(4, 6, 7);
    c.bench_function("qre trace 4x6", |b| b.iter(|| logit_qre_trace(black_box(&nf), &opts).unwrap()));

    let wide = random_game(12, 12, 8);
    c.bench_function("elimination 12x12", |b| b.iter(|| iterated_elimination(black_box(&wide))));
}

fn logs(c: &mut Criterion) {
    let bytes = synthetic_log(2_000, 1);
    let mut group = c.benchmark_group("log");
    group.throughput(criterion::Throughput::Bytes(bytes.len() as u64));
    group.bench_function("parse 2000 sessions", |b| {
        b.iter(|| parse_log(black_box(bytes.as_slice()), ParseMode::Strict).unwrap())
    });
    let events = parse_log(bytes.as_slice(), ParseMode::Strict).unwrap().events;
    group.bench_function("aggregate and report", |b| {
        b.iter_batched(
            || events.clone(),
            |events| build_report(&sessions_from_events(&events).summaries, true),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, solver, logs);
criterion_main!(benches);
