//! Whole-split evaluation and file emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use model::{AblationVariant, PoseForceNet};
use pipeline::WindowedSample;

use crate::metrics::{angle_diff, force_metrics, mpjpe, ForceMetrics, FINGERS};
use crate::{EvalError, Result};

/// One evaluated condition — a held-out user, an ablation variant, or a
/// plain test split.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Row name in emitted tables; kept to `[a-z0-9_]` so plot files can be
    /// whitespace-separated.
    pub label: String,
    /// Which network variant produced the predictions.
    pub variant: AblationVariant,
    /// Mean per-joint position error, cm.
    pub mpjpe_cm: f64,
    /// Mean absolute interior-angle difference, degrees.
    pub angle_diff_deg: f64,
    /// Per-finger and average force statistics, normalized units.
    pub force: ForceMetrics,
    /// Number of windows scored.
    pub windows: usize,
}

/// Score a network over a set of windows. Position and angle errors are
/// averaged per window; the force statistics treat the windows as one series
/// per finger, so at least two windows are required.
pub fn evaluate(
    net: &PoseForceNet,
    windows: &[WindowedSample],
    variant: AblationVariant,
    label: &str,
) -> Result<MetricsReport> {
    if windows.len() < 2 {
        return Err(EvalError::Usage(format!(
            "evaluation needs at least 2 windows, got {}",
            windows.len()
        )));
    }
    let mut pose_err = 0.0;
    let mut angle_err = 0.0;
    let mut pred_force = Vec::with_capacity(windows.len());
    let mut gt_force = Vec::with_capacity(windows.len());
    for w in windows {
        let out = net.predict(w, variant)?;
        pose_err += mpjpe(&out.pose, &w.pose_target)?;
        angle_err += angle_diff(&out.pose, &w.pose_target)?;
        let row: [f64; 5] = out
            .force
            .as_slice()
            .try_into()
            .expect("fused force head emits 5 values");
        pred_force.push(row);
        gt_force.push(w.force_target);
    }
    let n = windows.len() as f64;
    Ok(MetricsReport {
        label: sanitize_label(label),
        variant,
        mpjpe_cm: pose_err / n,
        angle_diff_deg: angle_err / n,
        force: force_metrics(&pred_force, &gt_force)?,
        windows: windows.len(),
    })
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_whitespace() || c == ',' { '_' } else { c })
        .collect()
}

// ── Emission ─────────────────────────────────────────────────────────────

/// Write the evaluation artifacts into `dir` and return the paths:
///
/// * `metrics.csv` — every report as one row, full column set (header
///   below), floats in shortest round-trip form so identical inputs emit
///   identical bytes.
/// * `per_finger_bars.txt` — three series per report
///   (`<label> <metric> <thumb> <index> <middle> <ring> <little>`).
/// * `per_user_bars.txt` — one series per summary metric across reports,
///   first line carrying the labels.
/// * `ablation_table.csv` — the condensed `variant,rmse,mae,pearson` view.
pub fn emit_report(reports: &[MetricsReport], dir: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(EvalError::Usage("no reports to emit".into()));
    }
    fs::create_dir_all(dir)?;

    let mut csv = String::from(METRICS_HEADER);
    for r in reports {
        let f = &r.force;
        write!(
            csv,
            "\n{},{},{},{},{},{},{},{}",
            r.label,
            r.variant,
            r.windows,
            r.mpjpe_cm,
            r.angle_diff_deg,
            f.average.rmse,
            f.average.mae,
            f.average.pearson
        )
        .unwrap();
        for s in &f.per_finger {
            write!(csv, ",{}", s.rmse).unwrap();
        }
        for s in &f.per_finger {
            write!(csv, ",{}", s.mae).unwrap();
        }
        for s in &f.per_finger {
            write!(csv, ",{}", s.pearson).unwrap();
        }
        let flags: String = f
            .per_finger
            .iter()
            .map(|s| if s.degenerate { '1' } else { '0' })
            .collect();
        write!(csv, ",{flags}").unwrap();
    }
    csv.push('\n');

    let mut fingers = String::from("# label metric thumb index middle ring little");
    for r in reports {
        for (metric, pick) in [
            ("rmse", (|s| s.rmse) as fn(&crate::FingerStats) -> f64),
            ("mae", |s| s.mae),
            ("pearson", |s| s.pearson),
        ] {
            write!(fingers, "\n{} {metric}", r.label).unwrap();
            for s in &r.force.per_finger {
                write!(fingers, " {}", pick(s)).unwrap();
            }
        }
    }
    fingers.push('\n');

    let mut users = String::from("labels");
    for r in reports {
        write!(users, " {}", r.label).unwrap();
    }
    for (metric, pick) in [
        ("mpjpe_cm", (|r: &MetricsReport| r.mpjpe_cm) as fn(&MetricsReport) -> f64),
        ("angle_diff_deg", |r| r.angle_diff_deg),
        ("force_rmse_avg", |r| r.force.average.rmse),
        ("force_pearson_avg", |r| r.force.average.pearson),
    ] {
        write!(users, "\n{metric}").unwrap();
        for r in reports {
            write!(users, " {}", pick(r)).unwrap();
        }
    }
    users.push('\n');

    let mut ablation = String::from("variant,rmse,mae,pearson");
    for r in reports {
        write!(
            ablation,
            "\n{},{},{},{}",
            r.variant, r.force.average.rmse, r.force.average.mae, r.force.average.pearson
        )
        .unwrap();
    }
    ablation.push('\n');

    let files = [
        ("metrics.csv", csv),
        ("per_finger_bars.txt", fingers),
        ("per_user_bars.txt", users),
        ("ablation_table.csv", ablation),
    ];
    let mut paths = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Column order of `metrics.csv`; fixed, append-only. The finger columns
/// follow [`FINGERS`] order.
pub const METRICS_HEADER: &str = "label,variant,windows,mpjpe_cm,angle_diff_deg,\
     force_rmse_avg,force_mae_avg,force_pearson_avg,\
     rmse_thumb,rmse_index,rmse_middle,rmse_ring,rmse_little,\
     mae_thumb,mae_index,mae_middle,mae_ring,mae_little,\
     pearson_thumb,pearson_index,pearson_middle,pearson_ring,pearson_little,\
     pearson_degenerate";

const _: () = assert!(FINGERS.len() == 5);
