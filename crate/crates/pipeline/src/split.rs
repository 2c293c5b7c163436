//! Train/test partitioning policies.

use std::collections::{BTreeMap, BTreeSet};

use crate::window::WindowedSample;
use crate::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPolicy {
    /// Hold out the last repetition of every gesture for every user.
    WithinUser,
    /// Hold out every window of one user.
    LeaveOneUserOut { fold: u32 },
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub policy: SplitPolicy,
}

impl DatasetSplit {
    pub fn train_users(&self) -> BTreeSet<u32> {
        self.train.iter().map(|s| s.user_id).collect()
    }

    pub fn test_users(&self) -> BTreeSet<u32> {
        self.test.iter().map(|s| s.user_id).collect()
    }
}

/// Partition preprocessed windows. Windows carry their trial identity, so
/// partitions never cut through a trial.
pub fn split(samples: &[WindowedSample], policy: SplitPolicy) -> Result<DatasetSplit> {
    match policy {
        SplitPolicy::LeaveOneUserOut { fold } => {
            let users: BTreeSet<u32> = samples.iter().map(|s| s.user_id).collect();
            if users.len() < 2 {
                return Err(PipelineError::Config(format!(
                    "leave-one-user-out needs at least 2 users, found {}",
                    users.len()
                )));
            }
            if !users.contains(&fold) {
                return Err(PipelineError::Config(format!(
                    "fold user {fold} not present in the dataset"
                )));
            }
            let (test, train): (Vec<_>, Vec<_>) =
                samples.iter().cloned().partition(|s| s.user_id == fold);
            Ok(DatasetSplit {
                train,
                test,
                policy,
            })
        }
        SplitPolicy::WithinUser => {
            let mut last_rep: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            for s in samples {
                let e = last_rep.entry((s.user_id, s.gesture_id)).or_insert(0);
                *e = (*e).max(s.rep);
            }
            if last_rep.values().any(|&mx| mx == 0) {
                return Err(PipelineError::Config(
                    "within-user split needs at least 2 repetitions per gesture".to_string(),
                ));
            }
            let (test, train): (Vec<_>, Vec<_>) = samples
                .iter()
                .cloned()
                .partition(|s| last_rep[&(s.user_id, s.gesture_id)] == s.rep);
            Ok(DatasetSplit {
                train,
                test,
                policy,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(user_id: u32, gesture_id: u32, rep: u32, trial_id: u32) -> WindowedSample {
        WindowedSample {
            imu: vec![0.0; 30 * 24],
            emg: vec![0.0; 30 * 6],
            pose_target: [0.0; 63],
            force_target: [0.0; 5],
            user_id,
            gesture_id,
            rep,
            trial_id,
            t_end_ms: 0.0,
        }
    }

    fn corpus(users: u32, gestures: u32, reps: u32) -> Vec<WindowedSample> {
        let mut out = Vec::new();
        let mut trial = 0;
        for u in 0..users {
            for g in 0..gestures {
                for r in 0..reps {
                    // three windows per trial
                    for _ in 0..3 {
                        out.push(sample(u, g, r, trial));
                    }
                    trial += 1;
                }
            }
        }
        out
    }

    #[test]
    fn louo_has_no_user_leakage() {
        let samples = corpus(3, 4, 2);
        for fold in 0..3 {
            let s = split(&samples, SplitPolicy::LeaveOneUserOut { fold }).unwrap();
            assert_eq!(s.test_users().into_iter().collect::<Vec<_>>(), vec![fold]);
            assert!(s.train_users().intersection(&s.test_users()).next().is_none());
            assert_eq!(s.train.len() + s.test.len(), samples.len());
        }
    }

    #[test]
    fn louo_needs_two_users() {
        let samples = corpus(1, 2, 2);
        assert!(split(&samples, SplitPolicy::LeaveOneUserOut { fold: 0 }).is_err());
    }

    #[test]
    fn louo_missing_fold_rejected() {
        let samples = corpus(3, 2, 2);
        assert!(split(&samples, SplitPolicy::LeaveOneUserOut { fold: 9 }).is_err());
    }

    #[test]
    fn within_user_holds_out_last_rep() {
        let samples = corpus(2, 4, 5);
        let s = split(&samples, SplitPolicy::WithinUser).unwrap();
        assert!(s.test.iter().all(|x| x.rep == 4));
        assert!(s.train.iter().all(|x| x.rep < 4));
        // 5 reps → exactly 1/5 of windows in test.
        assert_eq!(s.test.len() * 5, samples.len());
        // Both sides still contain every user.
        assert_eq!(s.train_users(), s.test_users());
    }

    #[test]
    fn within_user_needs_multiple_reps() {
        let samples = corpus(2, 3, 1);
        assert!(split(&samples, SplitPolicy::WithinUser).is_err());
    }
}
