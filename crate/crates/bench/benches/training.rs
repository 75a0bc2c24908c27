use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use hmb_bench::{desk_array, desk_channels, desk_codebook};
use hmb_core::codebook::{build_codebook, CodebookParams};
use hmb_core::harness::{simulate_trial, ExperimentConfig, TrialContext};
use hmb_core::multibeam::{optimize_phases, DeviationEvaluator, PhaseSearch, Quadrature};
use hmb_core::protocol::{build_schedule, exhaustive_train, hmb_train, ScheduleOptions};
use hmb_core::DemuxMode;

const P0: f64 = 0.0316;
const SIGMA2: f64 = 1e-12;

fn codebook(c: &mut Criterion) {
    let cfg = desk_array();
    let params = CodebookParams::for_array(&cfg);
    c.bench_function("codebook_build_4x32", |b| {
        b.iter(|| build_codebook(black_box(&cfg), &params).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let cb = desk_codebook();
    let chans = desk_channels();
    let opts = ScheduleOptions::for_codebook(&cb);
    c.bench_function("schedule_build_k2_b16_l6", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| build_schedule(2, 6, 16, &cb, &opts, &mut rng).unwrap())
    });
    let sched = build_schedule(2, 6, 16, &cb, &opts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    c.bench_function("hmb_train_k2_b16_l6", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        b.iter(|| hmb_train(&sched, &chans, P0, SIGMA2, DemuxMode::Plain, &mut rng).unwrap())
    });
    c.bench_function("exhaustive_train_k2", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        b.iter(|| exhaustive_train(&cb, &chans, P0, SIGMA2, &mut rng).unwrap())
    });
}

fn phases(c: &mut Criterion) {
    let cb = desk_codebook();
    let bucket: Vec<usize> = (0..cb.len()).step_by(16).collect();
    let quad = Quadrature::for_array(&cb.array);
    let eval = DeviationEvaluator::new(&bucket, &cb, &quad).unwrap();
    let search = PhaseSearch {
        restarts: 1,
        ..PhaseSearch::default()
    };
    let mut group = c.benchmark_group("phase_search");
    group.sample_size(10);
    group.bench_function("optimize_one_bucket", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        b.iter(|| optimize_phases(&eval, &search, &mut rng).unwrap())
    });
    group.finish();
}

fn sweep_trial(c: &mut Criterion) {
    let cfg = ExperimentConfig::desk();
    let ctx = TrialContext::new(&cfg).unwrap();
    let mut t = 0;
    c.bench_function("desk_trial_all_methods_9_snr", |b| {
        b.iter(|| {
            t += 1;
            simulate_trial(&ctx, t).unwrap()
        })
    });
}

criterion_group!(benches, codebook, training, phases, sweep_trial);
criterion_main!(benches);
