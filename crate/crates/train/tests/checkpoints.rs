//! Checkpoint round-trip and corruption handling.

mod common;

use std::fs;

use common::{class_windows, tiny_config};
use model::{build, AblationVariant};
use pipeline::{denormalize_force, normalize_force, NormalizationSpec};
use train::{load_checkpoint, save_checkpoint, TrainError, CHECKPOINT_MAGIC};

#[test]
fn round_trip_reproduces_outputs_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.w2fm");
    let cfg = tiny_config();
    let net = build(cfg.clone()).unwrap();
    let norm = NormalizationSpec {
        force_min: 0.25,
        force_max: 3.75,
    };
    save_checkpoint(&net, &norm, &path).unwrap();
    let (loaded, got_norm) = load_checkpoint(&path).unwrap();

    assert_eq!(loaded.config(), &cfg);
    assert_eq!(got_norm.force_min.to_bits(), norm.force_min.to_bits());
    assert_eq!(got_norm.force_max.to_bits(), norm.force_max.to_bits());

    for (i, w) in class_windows(&cfg, 10, 1, 9).iter().enumerate() {
        let a = net.predict(w, AblationVariant::Full).unwrap();
        let b = loaded.predict(w, AblationVariant::Full).unwrap();
        assert_eq!(a, b, "window {i} diverged after a round trip");
    }
}

#[test]
fn embedded_normalization_restores_denormalization_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.w2fm");
    let norm = NormalizationSpec {
        force_min: 0.0,
        force_max: 26f64.ln(),
    };
    save_checkpoint(&build(tiny_config()).unwrap(), &norm, &path).unwrap();
    let (_, loaded) = load_checkpoint(&path).unwrap();
    let f = [0.0, 3.5, 12.25, 24.9, 0.01];
    let y = normalize_force(&f, &norm);
    let back = denormalize_force(&y, &loaded);
    for k in 0..5 {
        assert_eq!(
            denormalize_force(&y, &norm)[k].to_bits(),
            back[k].to_bits(),
            "denormalization differs through the loaded spec"
        );
    }
}

#[test]
fn truncated_file_is_reported_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.w2fm");
    save_checkpoint(&build(tiny_config()).unwrap(), &NormalizationSpec::sensor_range(), &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    for cut in [bytes.len() * 3 / 5, 10, 0] {
        fs::write(&path, &bytes[..cut]).unwrap();
        match load_checkpoint(&path) {
            Err(TrainError::Corrupt(_)) => {}
            other => panic!("cut at {cut}: expected corrupt error, got {other:?}"),
        }
    }
}

#[test]
fn wrong_magic_and_version_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.w2fm");
    save_checkpoint(&build(tiny_config()).unwrap(), &NormalizationSpec::sensor_range(), &path).unwrap();
    let good = fs::read(&path).unwrap();

    let mut bad = good.clone();
    bad[0] = b'X';
    fs::write(&path, &bad).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(TrainError::Incompatible(_))));

    let mut bad = good.clone();
    bad[4..8].copy_from_slice(&99u32.to_le_bytes());
    fs::write(&path, &bad).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(TrainError::Incompatible(_))));

    assert_eq!(&good[..4], &CHECKPOINT_MAGIC);
}

#[test]
fn parameter_count_mismatch_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.w2fm");
    save_checkpoint(&build(tiny_config()).unwrap(), &NormalizationSpec::sensor_range(), &path).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count_at = 12 + json_len + 16;
    let n = u32::from_le_bytes(bytes[count_at..count_at + 4].try_into().unwrap());
    bytes[count_at..count_at + 4].copy_from_slice(&(n - 1).to_le_bytes());
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(TrainError::Corrupt(_))));
}
