//! Benchmark bodies; `benches/main.rs` wires them into criterion.

use criterion::{BenchmarkId, Criterion};

use ws_sim_core::analysis::gamma;
use ws_sim_core::engine::{run_event, run_reference, RunOptions};
use ws_sim_core::model::SimConfig;

/// Reference vs event engine across latency regimes. The event engine's
/// advantage grows with λ (more idle ticks to skip).
pub fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    for &(w, p, lambda) in &[(100_000u64, 32u32, 2u64), (100_000, 32, 262), (100_000, 256, 262)] {
        let config = SimConfig::new(w, p, lambda, 7);
        let label = format!("W{w}_p{p}_l{lambda}");
        group.bench_with_input(BenchmarkId::new("reference", &label), &config, |b, cfg| {
            b.iter(|| run_reference(cfg, &RunOptions::default()))
        });
        group.bench_with_input(BenchmarkId::new("event", &label), &config, |b, cfg| {
            b.iter(|| run_event(cfg, &RunOptions::default()))
        });
    }
    group.finish();
}

/// Series instrumentation overhead on the event engine.
pub fn instrumented(c: &mut Criterion) {
    let config = SimConfig::new(100_000, 64, 32, 7);
    c.bench_function("event_with_series", |b| {
        b.iter(|| run_event(&config, &RunOptions::with_series()))
    });
}

/// Exhaustive γ maximization.
pub fn gamma_search(c: &mut Criterion) {
    c.bench_function("gamma_512", |b| b.iter(|| gamma(512).unwrap()));
}
