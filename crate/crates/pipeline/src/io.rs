//! On-disk formats: per-trial CSV files, the session manifest, and the
//! binary windowed-dataset file ("W2F1", little-endian f64).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use synthhand::{SyntheticSession, TrialKind, FINGER_NAMES};

use crate::features::TrialRecord;
use crate::resample::IMU_COLS;
use crate::window::WindowedSample;
use crate::{PipelineError, Result};

const WINDOW_MAGIC: [u8; 4] = *b"W2F1";
const CSV_COLS: usize = 1 + IMU_COLS + 1 + 20 + 63 + 5;

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub users: Vec<ManifestUser>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestUser {
    pub user_id: u32,
    pub hand_length_cm: f64,
    pub emg_gain: f64,
    pub emg_baseline_noise: f64,
    pub imu_noise_std: f64,
    pub seed: u64,
    pub trials: Vec<ManifestTrial>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestTrial {
    /// Path relative to the dataset root.
    pub file: String,
    pub kind: String,
    pub gesture_id: u32,
    pub gesture_name: String,
    pub rep: u32,
    pub samples: usize,
}

fn kind_tag(kind: TrialKind) -> &'static str {
    match kind {
        TrialKind::Gesture { .. } => "gesture",
        TrialKind::RestCalibration => "rest_calibration",
        TrialKind::MvcCalibration => "mvc_calibration",
    }
}

fn kind_from_tag(tag: &str, rep: u32) -> Result<TrialKind> {
    match tag {
        "gesture" => Ok(TrialKind::Gesture { rep }),
        "rest_calibration" => Ok(TrialKind::RestCalibration),
        "mvc_calibration" => Ok(TrialKind::MvcCalibration),
        other => Err(PipelineError::Config(format!("unknown trial kind {other:?}"))),
    }
}

pub fn save_manifest(root: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = root.join("manifest.json");
    let file = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(file, manifest)
        .map_err(|e| PipelineError::Config(format!("manifest serialization: {e}")))?;
    Ok(path)
}

pub fn load_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join("manifest.json");
    let file = BufReader::new(File::open(&path)?);
    serde_json::from_reader(file).map_err(|e| PipelineError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

// --------------------------------------------------------------- trial CSV

fn csv_header() -> String {
    let mut cols = vec!["timestamp_ms".to_string()];
    for device in ["ring", "watch"] {
        for axis in ["x", "y", "z"] {
            cols.push(format!("{device}_accel_{axis}_mps2"));
        }
        for r in 0..3 {
            for c in 0..3 {
                cols.push(format!("{device}_rot_{r}{c}"));
            }
        }
    }
    cols.push("emg_mv".to_string());
    for finger in FINGER_NAMES {
        for joint in ["mcp", "pip", "dip", "abd"] {
            cols.push(format!("angle_{finger}_{joint}_rad"));
        }
    }
    for landmark in 0..21 {
        for axis in ["x", "y", "z"] {
            cols.push(format!("pose_{landmark:02}_{axis}_cm"));
        }
    }
    for finger in FINGER_NAMES {
        cols.push(format!("force_{finger}_n"));
    }
    debug_assert_eq!(cols.len(), CSV_COLS);
    cols.join(",")
}

/// Write one trial as CSV. Values use Rust's shortest round-trip float
/// formatting, so reading the file back is bit-exact.
pub fn write_trial_csv(path: &Path, record: &TrialRecord) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", csv_header())?;
    let mut row: Vec<String> = Vec::with_capacity(CSV_COLS);
    for i in 0..record.len() {
        row.clear();
        row.push(record.timestamps_ms[i].to_string());
        for v in &record.imu[i * IMU_COLS..(i + 1) * IMU_COLS] {
            row.push(v.to_string());
        }
        row.push(record.emg_mv[i].to_string());
        for v in &record.angles_rad[i] {
            row.push(v.to_string());
        }
        for v in &record.pose_cm[i] {
            row.push(v.to_string());
        }
        for v in &record.force_n[i] {
            row.push(v.to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a trial file back. Identity fields come from the manifest entry,
/// not the file, so the caller supplies them.
pub fn load_trial_csv(
    path: &Path,
    user_id: u32,
    gesture_id: u32,
    rep: u32,
    kind: TrialKind,
) -> Result<TrialRecord> {
    let parse = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>().map_err(|e| PipelineError::Parse {
            path: path.display().to_string(),
            detail: format!("line {line}: {e}"),
        })
    };

    let file = BufReader::new(File::open(path)?);
    let mut record = TrialRecord {
        user_id,
        gesture_id,
        rep,
        kind,
        timestamps_ms: Vec::new(),
        imu: Vec::new(),
        emg_mv: Vec::new(),
        angles_rad: Vec::new(),
        pose_cm: Vec::new(),
        force_n: Vec::new(),
    };
    for (idx, line) in file.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_COLS {
            return Err(PipelineError::Parse {
                path: path.display().to_string(),
                detail: format!("line {}: {} columns, expected {CSV_COLS}", idx + 1, fields.len()),
            });
        }
        let mut vals = Vec::with_capacity(CSV_COLS);
        for f in &fields {
            vals.push(parse(f, idx + 1)?);
        }
        let mut at = 0usize;
        let mut take = |n: usize| {
            let s = &vals[at..at + n];
            at += n;
            s.to_vec()
        };
        record.timestamps_ms.push(take(1)[0]);
        record.imu.extend(take(IMU_COLS));
        record.emg_mv.push(take(1)[0]);
        record
            .angles_rad
            .push(take(20).try_into().expect("20 angles"));
        record.pose_cm.push(take(63).try_into().expect("63 pose"));
        record.force_n.push(take(5).try_into().expect("5 forces"));
        debug_assert_eq!(at, CSV_COLS);
    }
    Ok(record)
}

/// Write one user's session under `root/user_XXX/`, one CSV per trial.
pub fn write_session_dir(root: &Path, session: &SyntheticSession) -> Result<ManifestUser> {
    let user = &session.user;
    let dir = root.join(format!("user_{:03}", user.user_id));
    fs::create_dir_all(&dir)?;
    let mut trials = Vec::with_capacity(session.trials.len());
    for (i, trial) in session.trials.iter().enumerate() {
        let record = TrialRecord::from_trial(user.user_id, trial);
        let rel = format!("user_{:03}/trial_{i:03}.csv", user.user_id);
        write_trial_csv(&root.join(&rel), &record)?;
        trials.push(ManifestTrial {
            file: rel,
            kind: kind_tag(trial.kind).to_string(),
            gesture_id: trial.script.gesture_id,
            gesture_name: trial.script.name.clone(),
            rep: record.rep,
            samples: trial.len(),
        });
    }
    Ok(ManifestUser {
        user_id: user.user_id,
        hand_length_cm: user.hand_length_cm,
        emg_gain: user.emg_gain,
        emg_baseline_noise: user.emg_baseline_noise,
        imu_noise_std: user.imu_noise_std,
        seed: user.seed,
        trials,
    })
}

/// Load every trial of one manifest user back into memory.
pub fn read_session_dir(root: &Path, user: &ManifestUser) -> Result<Vec<TrialRecord>> {
    user.trials
        .iter()
        .map(|t| {
            let kind = kind_from_tag(&t.kind, t.rep)?;
            load_trial_csv(&root.join(&t.file), user.user_id, t.gesture_id, t.rep, kind)
        })
        .collect()
}

// ------------------------------------------------------- windowed dataset

fn put_u32(out: &mut impl Write, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s(out: &mut impl Write, vs: &[f64]) -> Result<()> {
    for v in vs {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32(inp: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    inp.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64s(inp: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        inp.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

/// Persist windowed samples: "W2F1" magic, then dimensions, then records,
/// all little-endian.
pub fn save_windows(path: &Path, samples: &[WindowedSample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&WINDOW_MAGIC)?;
    put_u32(&mut out, samples.len() as u32)?;
    put_u32(&mut out, 30)?;
    put_u32(&mut out, IMU_COLS as u32)?;
    put_u32(&mut out, 6)?;
    for s in samples {
        put_u32(&mut out, s.user_id)?;
        put_u32(&mut out, s.gesture_id)?;
        put_u32(&mut out, s.rep)?;
        put_u32(&mut out, s.trial_id)?;
        put_f64s(&mut out, &[s.t_end_ms])?;
        put_f64s(&mut out, &s.imu)?;
        put_f64s(&mut out, &s.emg)?;
        put_f64s(&mut out, &s.pose_target)?;
        put_f64s(&mut out, &s.force_target)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_windows(path: &Path) -> Result<Vec<WindowedSample>> {
    let mut inp = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    inp.read_exact(&mut magic)?;
    if magic != WINDOW_MAGIC {
        return Err(PipelineError::BadMagic {
            expected: WINDOW_MAGIC,
            got: magic,
        });
    }
    let n = get_u32(&mut inp)? as usize;
    let win = get_u32(&mut inp)? as usize;
    let imu_dim = get_u32(&mut inp)? as usize;
    let emg_dim = get_u32(&mut inp)? as usize;
    if win != 30 || imu_dim != IMU_COLS || emg_dim != 6 {
        return Err(PipelineError::Config(format!(
            "unsupported windowed layout {win}×{imu_dim}/{emg_dim}"
        )));
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let user_id = get_u32(&mut inp)?;
        let gesture_id = get_u32(&mut inp)?;
        let rep = get_u32(&mut inp)?;
        let trial_id = get_u32(&mut inp)?;
        let t_end_ms = get_f64s(&mut inp, 1)?[0];
        let imu = get_f64s(&mut inp, win * imu_dim)?;
        let emg = get_f64s(&mut inp, win * emg_dim)?;
        let pose: [f64; 63] = get_f64s(&mut inp, 63)?.try_into().expect("63 pose");
        let force: [f64; 5] = get_f64s(&mut inp, 5)?.try_into().expect("5 forces");
        samples.push(WindowedSample {
            imu,
            emg,
            pose_target: pose,
            force_target: force,
            user_id,
            gesture_id,
            rep,
            trial_id,
            t_end_ms,
        });
    }
    Ok(samples)
}
