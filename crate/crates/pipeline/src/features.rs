//! The full raw-session → windowed-features transform.

use synthhand::{SyntheticSession, Trial, TrialKind};

use crate::calibrate::{calibrate, normalize_emg, CalibrationProfile};
use crate::emg::{expand_emg, rectify_smooth};
use crate::force::{normalize_force, NormalizationSpec};
use crate::resample::{resample, resample_imu, IMU_COLS};
use crate::window::{window, Features30Hz, WindowedSample};
use crate::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub src_hz: f64,
    pub dst_hz: f64,
    pub force: NormalizationSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            src_hz: 100.0,
            dst_hz: 30.0,
            force: NormalizationSpec::sensor_range(),
        }
    }
}

/// Column-faithful image of one recorded trial (what a trial file holds).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub user_id: u32,
    pub gesture_id: u32,
    pub rep: u32,
    pub kind: TrialKind,
    pub timestamps_ms: Vec<f64>,
    /// Row-major T×24: ring accel+rot, watch accel+rot.
    pub imu: Vec<f64>,
    pub emg_mv: Vec<f64>,
    pub angles_rad: Vec<[f64; 20]>,
    pub pose_cm: Vec<[f64; 63]>,
    pub force_n: Vec<[f64; 5]>,
}

impl TrialRecord {
    pub fn from_trial(user_id: u32, trial: &Trial) -> Self {
        let t = trial.len();
        let mut imu = Vec::with_capacity(t * IMU_COLS);
        for i in 0..t {
            imu.extend_from_slice(&trial.ring.accel[i]);
            imu.extend_from_slice(&trial.ring.rot[i]);
            imu.extend_from_slice(&trial.watch.accel[i]);
            imu.extend_from_slice(&trial.watch.rot[i]);
        }
        TrialRecord {
            user_id,
            gesture_id: trial.script.gesture_id,
            rep: match trial.kind {
                TrialKind::Gesture { rep } => rep,
                _ => 0,
            },
            kind: trial.kind,
            timestamps_ms: trial.timestamps_ms.clone(),
            imu,
            emg_mv: trial.emg_mv.clone(),
            angles_rad: trial.angles.iter().map(|a| a.as_flat()).collect(),
            pose_cm: trial.pose_cm.clone(),
            force_n: trial.force_n.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }
}

/// Resample one trial to the model rate, normalize EMG against the user's
/// calibration and force against `cfg.force`, and expand EMG to 6 lags.
pub fn preprocess_trial(
    record: &TrialRecord,
    cal: &CalibrationProfile,
    cfg: &PipelineConfig,
    trial_id: u32,
) -> Result<Features30Hz> {
    cfg.force.validate()?;

    // EMG: envelope at capture rate, then down, then calibrated units.
    let envelope = rectify_smooth(&record.emg_mv)?;
    let envelope30 = resample(&envelope, 1, cfg.src_hz, cfg.dst_hz)?;
    let calibrated: Vec<f64> = envelope30.iter().map(|&v| normalize_emg(v, cal)).collect();
    let emg = expand_emg(&calibrated)?;

    let imu = resample_imu(&record.imu, cfg.src_hz, cfg.dst_hz)?;

    let flat_pose: Vec<f64> = record.pose_cm.iter().flatten().copied().collect();
    let pose30 = resample(&flat_pose, 63, cfg.src_hz, cfg.dst_hz)?;
    let pose_cm: Vec<[f64; 63]> = pose30
        .chunks_exact(63)
        .map(|c| c.try_into().expect("63-wide chunk"))
        .collect();

    let flat_force: Vec<f64> = record.force_n.iter().flatten().copied().collect();
    let force30 = resample(&flat_force, 5, cfg.src_hz, cfg.dst_hz)?;
    let force_norm: Vec<[f64; 5]> = force30
        .chunks_exact(5)
        .map(|c| {
            let f: [f64; 5] = c.try_into().expect("5-wide chunk");
            normalize_force(&f, &cfg.force)
        })
        .collect();

    let timestamps_ms = resample(&record.timestamps_ms, 1, cfg.src_hz, cfg.dst_hz)?;

    let t = timestamps_ms.len();
    if emg.len() != t || imu.len() / IMU_COLS != t || pose_cm.len() != t || force_norm.len() != t {
        return Err(PipelineError::Config(format!(
            "stream lengths diverged after resampling trial {trial_id}"
        )));
    }

    Ok(Features30Hz {
        user_id: record.user_id,
        gesture_id: record.gesture_id,
        rep: record.rep,
        trial_id,
        imu,
        emg,
        pose_cm,
        force_norm,
        timestamps_ms,
    })
}

/// Preprocess a whole session: calibrate from the rest/MVC trials, then
/// window every gesture trial. `trial_id_base` offsets this session's
/// trial ids so they stay unique across a multi-user dataset.
pub fn preprocess_session(
    session: &SyntheticSession,
    cfg: &PipelineConfig,
    trial_id_base: u32,
) -> Result<(Vec<WindowedSample>, CalibrationProfile)> {
    let user_id = session.user.user_id;
    let rest = session
        .trials
        .iter()
        .find(|t| t.kind == TrialKind::RestCalibration)
        .ok_or_else(|| PipelineError::Config(format!("user {user_id}: no rest trial")))?;
    let mvc = session
        .trials
        .iter()
        .find(|t| t.kind == TrialKind::MvcCalibration)
        .ok_or_else(|| PipelineError::Config(format!("user {user_id}: no MVC trial")))?;
    let cal = calibrate(user_id, &rest.emg_mv, &mvc.emg_mv)?;

    let mut samples = Vec::new();
    for (i, trial) in session.trials.iter().enumerate() {
        if !matches!(trial.kind, TrialKind::Gesture { .. }) {
            continue;
        }
        let record = TrialRecord::from_trial(user_id, trial);
        let feat = preprocess_trial(&record, &cal, cfg, trial_id_base + i as u32)?;
        samples.extend(window(&feat));
    }
    Ok((samples, cal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use synthhand::{generate_user_session, GeneratorConfig};

    fn tiny_session() -> SyntheticSession {
        generate_user_session(
            0,
            &GeneratorConfig {
                n_users: 1,
                reps_per_gesture: 1,
                seed: 13,
            },
        )
        .unwrap()
    }

    #[test]
    fn session_windows_have_expected_count_and_shape() {
        let session = tiny_session();
        let (samples, cal) = preprocess_session(&session, &PipelineConfig::default(), 0).unwrap();
        // 4 s trials: 401 frames → 121 at 30 Hz → 19 windows each, 20 trials.
        assert_eq!(samples.len(), 20 * 19);
        assert!(cal.emg_mvc_level > cal.emg_rest_level);
        for s in &samples {
            assert_eq!(s.imu.len(), 30 * IMU_COLS);
            assert_eq!(s.emg.len(), 30 * 6);
            assert!(s.force_target.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn calibration_trials_produce_no_windows() {
        let session = tiny_session();
        let (samples, _) = preprocess_session(&session, &PipelineConfig::default(), 0).unwrap();
        assert!(samples.iter().all(|s| s.gesture_id < 20));
    }

    #[test]
    fn trial_ids_stay_distinct_and_offset() {
        let session = tiny_session();
        let (samples, _) = preprocess_session(&session, &PipelineConfig::default(), 1000).unwrap();
        let mut ids: Vec<u32> = samples.iter().map(|s| s.trial_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 20);
        assert!(ids.iter().all(|&id| (1000..1022).contains(&id)));
    }
}
