//! Throughput benches over the hot paths. Run twice to compare the
//! data-parallel core against the sequential fallback:
//!
//! ```sh
//! cargo bench -p esser-core
//! cargo bench -p esser-core --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use esser_core::eval::{evaluate_dataset, ReportConfig, TrialEstimates};
use esser_core::gradcheck::run_check;
use esser_core::loss::{esser, si_sdr, LossConfig};
use esser_core::mixer::{build_trial, DatasetConfig, OracleMode, SnrSpec, Trial};
use esser_core::pit::pit_apply;
use esser_core::signal::make_orthogonal_fixture;

fn one_trial(seed: u64, t: usize) -> Trial {
    let set = make_orthogonal_fixture(seed, 2, t).unwrap();
    build_trial(
        format!("bench{seed}"),
        set.clean_sources().to_vec(),
        set.noises().to_vec(),
        &DatasetConfig::new(SnrSpec::Db(0.0), OracleMode::NoisyOracle),
    )
    .unwrap()
}

fn loss_kernels(c: &mut Criterion) {
    let trial = one_trial(1, 16_000);
    let reference = &trial.oracles()[0];
    let estimate = trial.mixture();
    c.bench_function("si_sdr_16k", |b| {
        b.iter(|| si_sdr(reference, estimate).unwrap())
    });

    let cfg = LossConfig::esser(0.3).unwrap();
    let n_hat = &trial.noises()[0];
    c.bench_function("esser_16k", |b| {
        b.iter(|| esser(estimate, n_hat, reference, &cfg).unwrap())
    });
}

fn pit_search(c: &mut Criterion) {
    let set = make_orthogonal_fixture(2, 3, 4_096).unwrap();
    let refs = set.clean_sources().to_vec();
    let ests: Vec<_> = refs.iter().rev().cloned().collect();
    let cfg = LossConfig::si_sdr();
    c.bench_function("pit_k3_4096", |b| {
        b.iter(|| pit_apply(&refs, &ests, None, &cfg).unwrap())
    });
}

fn batch_eval(c: &mut Criterion) {
    let trials: Vec<Trial> = (0..16).map(|i| one_trial(100 + i, 2_048)).collect();
    let estimates: Vec<TrialEstimates> = trials
        .iter()
        .map(|t| TrialEstimates {
            trial_id: t.trial_id().to_string(),
            sources: t.oracles().to_vec(),
            noise: Some(t.mixture().clone()),
        })
        .collect();
    c.bench_function("evaluate_dataset_16x2048", |b| {
        b.iter_batched(
            || (),
            |_| evaluate_dataset(&trials, &estimates, ReportConfig::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn gradient_checks(c: &mut Criterion) {
    let cfg = LossConfig::esser(0.3).unwrap();
    c.bench_function("gradcheck_esser_8x64", |b| {
        b.iter(|| run_check(&cfg, 7, 8, 64, 1e-6).unwrap())
    });
}

criterion_group!(benches, loss_kernels, pit_search, batch_eval, gradient_checks);
criterion_main!(benches);
