//! Compares the data-parallel kernels against single-threaded execution.
//!
//! Both arms run identical library code: the `one_thread` arm installs a
//! local one-worker pool, so every parallel map inside the call degrades to
//! sequential order. Building with `--no-default-features` compiles the
//! maps to plain loops instead, making the arms coincide; that build is the
//! sequential fallback and can be benchmarked the same way.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sftlab_core::convex::kink_scan;
use sftlab_core::ldp::gartner_audit;
use sftlab_core::rate::RateFunctionHandle;
use sftlab_core::{Potential, Sft};

fn pools() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    vec![
        ("default_pool", None),
        (
            "one_thread",
            Some(rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ),
    ]
}

fn run_in<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

/// 501 scan nodes, each requiring one-sided pressure derivatives on a
/// five-symbol reducible system.
fn bench_kink_scan(c: &mut Criterion) {
    let union = Sft::full_shift(2).disjoint_union(&Sft::full_shift(3));
    let zero = Potential::zero(&union);
    let block = Potential::symbol_set_indicator(&union, &[0, 1]);
    let mut group = c.benchmark_group("scan_for_kinks");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| {
                run_in(&pool, || {
                    kink_scan(&union, &zero, &block, (-1.0, 2.0), black_box(501)).unwrap()
                })
            })
        });
    }
    group.finish();
}

/// 19 grid points, each solving the conjugate ascent and the penalized
/// primal program for the coin-flip rate function.
fn bench_duality_audit(c: &mut Criterion) {
    let sft = Sft::full_shift(2);
    let zero = Potential::zero(&sft);
    let heads = Potential::indicator(&sft, &[1]).unwrap();
    let handle = RateFunctionHandle::new(&sft, &zero, &[heads]).unwrap();
    let grid: Vec<Vec<f64>> = (1..=19).map(|k| vec![0.05 * k as f64]).collect();
    let mut group = c.benchmark_group("duality_audit");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| run_in(&pool, || handle.duality_audit(black_box(&grid)).unwrap()))
        });
    }
    group.finish();
}

/// Nine ball-probability jobs (three lengths, three centers), each an
/// exact enumeration over all words of that length.
fn bench_ball_audit(c: &mut Criterion) {
    let sft = Sft::full_shift(2);
    let zero = Potential::zero(&sft);
    let heads = Potential::indicator(&sft, &[1]).unwrap();
    let tilt = Potential::zero(&sft);
    let schedule = [10usize, 12, 14];
    let grid = vec![vec![0.6], vec![0.75], vec![0.9]];
    let mut group = c.benchmark_group("ball_probability_audit");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| {
                run_in(&pool, || {
                    gartner_audit(
                        &sft,
                        &zero,
                        &tilt,
                        std::slice::from_ref(&heads),
                        black_box(&schedule),
                        &grid,
                        0.05,
                    )
                    .unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_kink_scan, bench_duality_audit, bench_ball_audit);
criterion_main!(benches);
