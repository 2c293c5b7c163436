//! End-to-end pipeline checks on generated sessions plus on-disk format
//! round-trips.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pipeline::{
    calibrate, denormalize_force, expand_emg, load_manifest, load_trial_csv, load_windows,
    normalize_emg, normalize_force, preprocess_session, read_session_dir, rectify_smooth,
    save_manifest, save_windows, split, write_session_dir, write_trial_csv, Manifest,
    NormalizationSpec, PipelineConfig, PipelineError, SplitPolicy, TrialRecord,
};
use synthhand::{
    builtin_gestures, generate_user_session, simulate_emg, synthesize_trial, GeneratorConfig,
    TrialKind,
};

fn small_session(user_id: u32, reps: u32, seed: u64) -> synthhand::SyntheticSession {
    generate_user_session(
        user_id,
        &GeneratorConfig {
            n_users: user_id + 1,
            reps_per_gesture: reps,
            seed,
        },
    )
    .unwrap()
}

/// The spec for the envelope stage: it must recover the amplitude
/// modulation the generator applied. Averaged over carrier realizations
/// to separate estimator noise from tracking error.
#[test]
fn envelope_recovers_generator_modulation() {
    let script = &builtin_gestures()[8];
    let (_, _, forces) = synthesize_trial(script).unwrap();
    let n = forces.samples.len();

    let mut mean_env = vec![0.0f64; n];
    let runs = 10u64;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mv = simulate_emg(&forces.samples, 1.0, 0.0, &mut rng).unwrap();
        let env = rectify_smooth(&mv).unwrap();
        for (m, e) in mean_env.iter_mut().zip(&env) {
            *m += e / runs as f64;
        }
    }

    let drive: Vec<f64> = forces
        .samples
        .iter()
        .map(|f| {
            synthhand::EMG_FINGER_WEIGHTS
                .iter()
                .zip(f)
                .map(|(w, &v)| w * (v / synthhand::FORCE_CEILING_N).powf(2.0 / 3.0))
                .sum()
        })
        .collect();

    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (me, md) = (mean(&mean_env), mean(&drive));
    let mut num = 0.0;
    let mut de = 0.0;
    let mut dd = 0.0;
    for i in 0..n {
        num += (mean_env[i] - me) * (drive[i] - md);
        de += (mean_env[i] - me).powi(2);
        dd += (drive[i] - md).powi(2);
    }
    let r = num / (de.sqrt() * dd.sqrt());
    assert!(r > 0.9, "envelope/modulation correlation {r}");
}

#[test]
fn generated_calibration_statistics() {
    let session = small_session(0, 1, 20);
    let rest = &session.trials[0];
    let mvc = &session.trials[1];
    assert_eq!(rest.kind, TrialKind::RestCalibration);
    assert_eq!(mvc.kind, TrialKind::MvcCalibration);
    let cal = calibrate(0, &rest.emg_mv, &mvc.emg_mv).unwrap();
    assert!(
        cal.emg_mvc_level > 3.0 * cal.emg_rest_level,
        "mvc {} vs rest {}",
        cal.emg_mvc_level,
        cal.emg_rest_level
    );

    // Rest envelope normalizes near 0; the MVC hold sits near 1. The 95th
    // percentile anchor means per-sample envelopes scatter below it.
    let rest_env = rectify_smooth(&rest.emg_mv).unwrap();
    let rest_norm =
        rest_env.iter().map(|&v| normalize_emg(v, &cal)).sum::<f64>() / rest_env.len() as f64;
    assert!(rest_norm.abs() < 0.1, "normalized rest mean {rest_norm}");

    let mvc_env = rectify_smooth(&mvc.emg_mv).unwrap();
    let hold: Vec<f64> = mvc_env[100..200].iter().map(|&v| normalize_emg(v, &cal)).collect();
    let hold_mean = hold.iter().sum::<f64>() / hold.len() as f64;
    assert!(hold_mean > 0.5, "normalized MVC hold mean {hold_mean}");
    let over = mvc_env.iter().filter(|&&v| normalize_emg(v, &cal) > 1.0).count();
    assert!(over <= mvc_env.len() / 15, "more than ~6% above 1: {over}");
}

#[test]
fn trial_csv_round_trips_bit_exactly() {
    let session = small_session(0, 1, 33);
    let trial = &session.trials[4];
    let record = TrialRecord::from_trial(0, trial);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    write_trial_csv(&path, &record).unwrap();
    let back = load_trial_csv(&path, 0, record.gesture_id, record.rep, record.kind).unwrap();
    assert_eq!(record, back);
}

#[test]
fn session_dir_and_manifest_round_trip() {
    let session = small_session(1, 1, 8);
    let dir = tempfile::tempdir().unwrap();
    let user = write_session_dir(dir.path(), &session).unwrap();
    let manifest = Manifest {
        seed: 8,
        sample_rate_hz: 100.0,
        users: vec![user],
    };
    save_manifest(dir.path(), &manifest).unwrap();

    let loaded = load_manifest(dir.path()).unwrap();
    assert_eq!(loaded, manifest);
    assert_eq!(loaded.users[0].trials.len(), 22);

    let records = read_session_dir(dir.path(), &loaded.users[0]).unwrap();
    assert_eq!(records.len(), session.trials.len());
    for (rec, trial) in records.iter().zip(&session.trials) {
        assert_eq!(*rec, TrialRecord::from_trial(1, trial));
    }
}

#[test]
fn windowed_dataset_round_trips_bit_exactly() {
    let session = small_session(0, 1, 55);
    let (samples, _) = preprocess_session(&session, &PipelineConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.w2f1");
    save_windows(&path, &samples).unwrap();
    let back = load_windows(&path).unwrap();
    assert_eq!(samples, back);
}

#[test]
fn corrupt_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.w2f1");
    std::fs::write(&path, b"NOPE and then some").unwrap();
    match load_windows(&path) {
        Err(PipelineError::BadMagic { got, .. }) => assert_eq!(&got, b"NOPE"),
        other => panic!("expected BadMagic, got {other:?}"),
    }
}

#[test]
fn splits_on_preprocessed_sessions() {
    let cfg = PipelineConfig::default();
    let mut all = Vec::new();
    for user in 0..2u32 {
        let session = small_session(user, 2, 60);
        let (samples, _) = preprocess_session(&session, &cfg, user * 100).unwrap();
        all.extend(samples);
    }

    let within = split(&all, SplitPolicy::WithinUser).unwrap();
    assert!(within.test.iter().all(|s| s.rep == 1));
    assert_eq!(within.test.len() * 2, all.len());

    for fold in 0..2 {
        let louo = split(&all, SplitPolicy::LeaveOneUserOut { fold }).unwrap();
        assert!(louo.train_users().intersection(&louo.test_users()).next().is_none());
        assert_eq!(louo.test_users().len(), 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expand_column_zero_identity(env in prop::collection::vec(0.0f64..10.0, 6..200)) {
        let rows = expand_emg(&env).unwrap();
        for (t, row) in rows.iter().enumerate() {
            prop_assert_eq!(row[0], env[t]);
        }
    }

    #[test]
    fn force_round_trip(f in prop::array::uniform5(0.0f64..25.0)) {
        let spec = NormalizationSpec::sensor_range();
        let back = denormalize_force(&normalize_force(&f, &spec), &spec);
        for k in 0..5 {
            prop_assert!((f[k] - back[k]).abs() < 1e-9);
        }
    }
}
