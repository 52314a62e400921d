//! Workflow tests written from outside the crate: each one strings public
//! calls together the way a downstream consumer would, touching only the
//! exported surface.

use std::fs;

use rand::Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

use esser_core::eval::{evaluate_dataset, load_estimates, read_report, write_report, ReportConfig, ReportFormat};
use esser_core::loss::{LossConfig, LossFamily, DEFAULT_EPSILON};
use esser_core::mixer::{build_dataset, load_dataset, DatasetConfig};
use esser_core::pit::pit_apply;
use esser_core::rng::seeded_rng;
use esser_core::signal::{make_orthogonal_fixture, Waveform};
use esser_core::toyopt::{
    apply_masks, optimize, synth_scenario, Separability, ToyRunConfig, DEFAULT_SAMPLES,
};
use esser_core::{Error, OracleMode, SnrSpec};

fn gaussian(seed: u64, label: &str, t: usize) -> Waveform {
    let mut rng = seeded_rng(seed, label);
    let samples: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    Waveform::new(samples, 16_000).unwrap()
}

#[test]
fn dataset_pipeline_runs_from_manifest_to_report() {
    let tmp = TempDir::new().unwrap();
    for (name, seed) in [("alpha", 5u64), ("beta", 6)] {
        for part in ["c0", "c1", "n0", "n1"] {
            let path = tmp.path().join(format!("{name}_{part}.wav"));
            esser_core::wav::write_wav(
                &path,
                &gaussian(seed, part, 1200),
                esser_core::wav::SampleFormat::Float32,
            )
            .unwrap();
        }
    }
    let manifest = tmp.path().join("inputs.jsonl");
    let mut text = String::new();
    for name in ["alpha", "beta"] {
        text.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "trial_id": name,
                "clean": [format!("{name}_c0.wav"), format!("{name}_c1.wav")],
                "noises": [format!("{name}_n0.wav"), format!("{name}_n1.wav")],
            })
        ));
    }
    fs::write(&manifest, text).unwrap();

    let ds = tmp.path().join("ds");
    let summary = build_dataset(
        &manifest,
        &DatasetConfig::new(SnrSpec::Db(10.0), OracleMode::NoisyOracle),
        &ds,
    )
    .unwrap();
    assert_eq!(summary.trials, 2);

    let trials = load_dataset(&ds).unwrap();
    assert_eq!(trials.len(), 2);

    // a system under test would drop estimate files next to the dataset;
    // here the clean references stand in for a perfect separator, and only
    // the first trial ships a noise estimate
    let est_dir = tmp.path().join("est");
    for trial in &trials {
        let sub = est_dir.join(trial.trial_id());
        fs::create_dir_all(&sub).unwrap();
        for (i, w) in trial.clean_refs().iter().enumerate() {
            esser_core::wav::write_wav(
                &sub.join(format!("est_{i}.wav")),
                w,
                esser_core::wav::SampleFormat::Float32,
            )
            .unwrap();
        }
    }
    esser_core::wav::write_wav(
        &est_dir.join("alpha").join("noise.wav"),
        &trials[0].summed_noise(),
        esser_core::wav::SampleFormat::Float32,
    )
    .unwrap();

    let estimates = load_estimates(&est_dir, &trials).unwrap();
    let report = evaluate_dataset(&trials, &estimates, ReportConfig::default()).unwrap();

    assert_eq!(report.per_trial.len(), 2);
    assert_eq!(report.per_trial[0].trial_id, "alpha");
    assert_eq!(report.per_trial[1].trial_id, "beta");
    assert!(report.per_trial[0].noise_si_sdri_db.is_some());
    assert!(report.per_trial[1].noise_si_sdri_db.is_none());
    assert_eq!(report.aggregates.noise_si_sdri_db.count, 1);
    assert!(report.aggregates.speech_si_sdr_db.mean.unwrap() > 40.0);

    let path = tmp.path().join("report.jsonl");
    write_report(&report, &path, ReportFormat::JsonLines).unwrap();
    assert_eq!(read_report(&path, ReportFormat::JsonLines).unwrap(), report);
}

#[test]
fn masks_replay_the_training_outputs_bitwise() {
    let trial = synth_scenario(
        7,
        DEFAULT_SAMPLES,
        SnrSpec::Db(5.0),
        Separability::SeparableSpeech,
        OracleMode::NoisyOracle,
    )
    .unwrap();
    let mut cfg = ToyRunConfig::new(LossConfig::si_sdr());
    cfg.steps = 40;
    let out = optimize(&trial, &cfg).unwrap();

    let replayed = apply_masks(trial.mixture(), &out.masks).unwrap();
    assert_eq!(replayed.len(), out.estimates.len() + 1);
    let bits = |w: &Waveform| w.samples().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
    for (a, b) in replayed.iter().zip(&out.estimates) {
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(bits(replayed.last().unwrap()), bits(&out.noise_estimate));
}

#[test]
fn loss_family_parsing_and_config_validation() {
    for (text, family) in [
        ("sisdr", LossFamily::SiSdr),
        ("si-sdr", LossFamily::SiSdr),
        ("si_sdr", LossFamily::SiSdr),
        ("esser", LossFamily::Esser),
        ("sdr-noisy", LossFamily::SdrNoisy),
    ] {
        assert_eq!(text.parse::<LossFamily>().unwrap(), family);
    }
    assert!("sdr".parse::<LossFamily>().is_err());

    assert!(matches!(LossConfig::esser(2.5), Err(Error::Config(_))));
    assert!(matches!(LossConfig::esser(-0.1), Err(Error::Config(_))));
    let cfg = LossConfig::esser(0.3).unwrap();
    assert_eq!(cfg.epsilon, DEFAULT_EPSILON);
    assert!((cfg.cap_db() - 120.0).abs() < 1e-12);
}

#[test]
fn pit_scores_the_esser_family_only_with_a_noise_head() {
    let set = make_orthogonal_fixture(3, 2, 256).unwrap();
    let refs: Vec<Waveform> = (0..2)
        .map(|k| {
            let s = set.clean_sources()[k].samples();
            let n = set.noises()[k].samples();
            let sum: Vec<f64> = s.iter().zip(n).map(|(a, b)| a + b).collect();
            set.clean_sources()[k].with_samples(sum).unwrap()
        })
        .collect();
    let ests = vec![set.clean_sources()[1].clone(), set.clean_sources()[0].clone()];
    let noise = set.noises()[0].clone();
    let cfg = LossConfig::esser(0.3).unwrap();

    assert!(matches!(pit_apply(&refs, &ests, None, &cfg), Err(Error::Config(_))));

    let out = pit_apply(&refs, &ests, Some(&noise), &cfg).unwrap();
    // estimates arrive swapped, so the permutation must cross over
    assert_eq!(out.best_permutation, vec![1, 0]);
    assert!(out.mean_value.is_finite());
    assert_eq!(out.per_source_values.len(), 2);
}
