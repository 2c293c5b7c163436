//! Cross-validation and ablation drivers: train a fresh network per
//! condition, score it on the held-out windows.

use std::collections::BTreeSet;

use model::{build, AblationVariant, ModelConfig};
use pipeline::{split, DatasetSplit, SplitPolicy, WindowedSample};
use train::{train_recipe, TrainConfig};

use crate::metrics::FingerStats;
use crate::report::{evaluate, MetricsReport};
use crate::{EvalError, Result};

/// Leave-one-user-out results: one row per held-out user plus their
/// field-wise arithmetic mean.
#[derive(Debug, Clone)]
pub struct LouoOutcome {
    pub per_user: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

/// Train and evaluate one fold per user: the fold's user contributes no
/// training windows, and the trained network is scored only on that user.
/// Every fold starts from the same seeded initialization, so the runs are
/// reproducible and comparable.
pub fn run_louo(
    windows: &[WindowedSample],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<LouoOutcome> {
    let users: BTreeSet<u32> = windows.iter().map(|s| s.user_id).collect();
    if users.len() < 2 {
        return Err(EvalError::Usage(format!(
            "leave-one-user-out needs at least 2 users, found {}",
            users.len()
        )));
    }
    let mut cfg = train_cfg.clone();
    cfg.checkpoint_path = None; // fold models are transient

    let mut per_user = Vec::with_capacity(users.len());
    for &user in &users {
        let fold = split(windows, SplitPolicy::LeaveOneUserOut { fold: user })?;
        assert!(
            fold.train_users().is_disjoint(&fold.test_users()),
            "user {user} appears on both sides of its own fold"
        );
        let mut net = build(model_cfg.clone())?;
        train_recipe(&mut net, &fold, &cfg)?;
        let report = evaluate(&net, &fold.test, cfg.variant, &format!("user_{user}"))?;
        log::info!(
            "fold user_{user}: mpjpe {:.3} cm, angle {:.2}°, force pearson {:.3}",
            report.mpjpe_cm,
            report.angle_diff_deg,
            report.force.average.pearson
        );
        per_user.push(report);
    }
    let mean = mean_report(&per_user);
    Ok(LouoOutcome { per_user, mean })
}

/// Train one ablation variant on the split's training side and score it on
/// the test side. Removing an input stream also removes its auxiliary loss
/// term — supervising a branch that only ever sees zeros would train it to
/// be a bias lookup and distort the comparison.
pub fn run_ablation(
    variant: AblationVariant,
    data: &DatasetSplit,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<MetricsReport> {
    let mut cfg = train_cfg.clone();
    cfg.variant = variant;
    cfg.checkpoint_path = None; // variant models are transient
    match variant {
        AblationVariant::NoEmg => cfg.loss_weights.lambda_emg = 0.0,
        AblationVariant::NoImu => cfg.loss_weights.lambda_imu = 0.0,
        AblationVariant::Full | AblationVariant::NoCrossAttention => {}
    }
    let mut net = build(model_cfg.clone())?;
    train_recipe(&mut net, data, &cfg)?;
    evaluate(&net, &data.test, variant, variant.label())
}

/// All four variants in [`AblationVariant::ALL`] order.
pub fn run_ablation_suite(
    data: &DatasetSplit,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<MetricsReport>> {
    AblationVariant::ALL
        .into_iter()
        .map(|v| run_ablation(v, data, model_cfg, train_cfg))
        .collect()
}

/// Field-wise arithmetic mean of the rows (every numeric field, the average
/// block included, is the plain mean of the rows' values; flags are OR-ed).
fn mean_report(rows: &[MetricsReport]) -> MetricsReport {
    let n = rows.len() as f64;
    let mean = |pick: &dyn Fn(&MetricsReport) -> f64| -> f64 {
        rows.iter().map(pick).sum::<f64>() / n
    };
    let mean_stats = |pick: &dyn Fn(&MetricsReport) -> FingerStats| -> FingerStats {
        FingerStats {
            rmse: mean(&|r| pick(r).rmse),
            mae: mean(&|r| pick(r).mae),
            pearson: mean(&|r| pick(r).pearson),
            degenerate: rows.iter().any(|r| pick(r).degenerate),
        }
    };
    MetricsReport {
        label: "mean".into(),
        variant: rows[0].variant,
        mpjpe_cm: mean(&|r| r.mpjpe_cm),
        angle_diff_deg: mean(&|r| r.angle_diff_deg),
        force: crate::ForceMetrics {
            per_finger: std::array::from_fn(|f| mean_stats(&move |r| r.force.per_finger[f])),
            average: mean_stats(&|r| r.force.average),
        },
        windows: rows.iter().map(|r| r.windows).sum(),
    }
}
