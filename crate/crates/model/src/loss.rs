//! The composite training loss.
//!
//! `L_total = L_fused + λ_IMU·L_IMU + λ_EMG·L_EMG + λ_Angle·L_Angle
//!            (+ w_smooth·L_smooth + w_sat·L_sat when enabled)`
//!
//! where `L_IMU`/`L_EMG` are pose+force MSEs of the per-branch auxiliary
//! heads, `L_Angle` compares the 15 interior joint angles of the fused pose
//! against the target's, and `L_fused` is the pose+force MSE of the fused
//! heads themselves. The fused term carries a fixed weight of 1: without it
//! the fused force head would receive no gradient at all (the three λ-terms
//! only touch the auxiliary heads and the fused pose's angles), and the angle
//! loss alone pins neither position nor scale of the fused pose.
//!
//! The reported breakdown recomposes into the reported total exactly: the
//! value-level path runs the same graph ops in the same order as training.

use pipeline::{WindowedSample, FORCE_CLIP_MAX};
use serde::{Deserialize, Serialize};
use tensorgrad::{Graph, TensorId};

use crate::angles::shared_triples;
use crate::net::{ModelOutput, SampleNodes};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_imu: f64,
    pub lambda_emg: f64,
    pub lambda_angle: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_imu: 0.5,
            lambda_emg: 0.5,
            lambda_angle: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("lambda_imu", self.lambda_imu),
            ("lambda_emg", self.lambda_emg),
            ("lambda_angle", self.lambda_angle),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::Config(format!("{what} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Optional loss terms; a term is active when its weight is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossOptions {
    /// Weight of the squared first difference of fused force across
    /// consecutive same-trial windows in a batch.
    pub smooth_weight: f64,
    /// Weight of the penalty on fused force exceeding `saturation_limit`.
    pub saturation_weight: f64,
    /// Normalized-force ceiling for the saturation penalty.
    pub saturation_limit: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            smooth_weight: 0.0,
            saturation_weight: 0.0,
            saturation_limit: FORCE_CLIP_MAX,
        }
    }
}

impl LossOptions {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("smooth_weight", self.smooth_weight),
            ("saturation_weight", self.saturation_weight),
            ("saturation_limit", self.saturation_limit),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::Config(format!("{what} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Scalar values of every loss term, averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Fused-head pose+force MSE (fixed weight 1).
    pub fused: f64,
    pub imu: f64,
    pub emg: f64,
    pub angle: f64,
    pub smooth: Option<f64>,
    pub saturation: Option<f64>,
}

impl LossBreakdown {
    /// Re-derive the total from the parts, with the exact operation order the
    /// graph uses, so equality is bit-for-bit rather than approximate.
    pub fn recompose(&self, w: &LossWeights, opts: &LossOptions) -> f64 {
        let mut t = self.fused;
        t += self.imu * w.lambda_imu;
        t += self.emg * w.lambda_emg;
        t += self.angle * w.lambda_angle;
        if let Some(s) = self.smooth {
            t += s * opts.smooth_weight;
        }
        if let Some(s) = self.saturation {
            t += s * opts.saturation_weight;
        }
        t
    }
}

/// Graph nodes of the loss terms; `total` is the node to run backward from.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: TensorId,
    pub fused: TensorId,
    pub imu: TensorId,
    pub emg: TensorId,
    pub angle: TensorId,
    pub smooth: Option<TensorId>,
    pub saturation: Option<TensorId>,
}

impl LossNodes {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        LossBreakdown {
            total: g.value(self.total),
            fused: g.value(self.fused),
            imu: g.value(self.imu),
            emg: g.value(self.emg),
            angle: g.value(self.angle),
            smooth: self.smooth.map(|n| g.value(n)),
            saturation: self.saturation.map(|n| g.value(n)),
        }
    }
}

/// Average a non-empty list of scalar nodes.
fn mean_of(g: &mut Graph, parts: &[TensorId]) -> Result<TensorId> {
    let mut acc = parts[0];
    for &p in &parts[1..] {
        acc = g.add(acc, p)?;
    }
    Ok(g.scale(acc, 1.0 / parts.len() as f64))
}

/// Append the composite loss for a batch of forward passes to the graph.
/// `outs[k]` must be the forward pass of `samples[k]`; window adjacency for
/// the smoothness term is batch order restricted to equal `trial_id`s.
pub fn loss_nodes(
    g: &mut Graph,
    outs: &[SampleNodes],
    samples: &[WindowedSample],
    w: &LossWeights,
    opts: &LossOptions,
) -> Result<LossNodes> {
    w.validate()?;
    opts.validate()?;
    if outs.is_empty() || outs.len() != samples.len() {
        return Err(ModelError::Config(format!(
            "loss needs matching non-empty batches, got {} outputs for {} samples",
            outs.len(),
            samples.len()
        )));
    }
    let triples = shared_triples();
    let mut fused_parts = Vec::with_capacity(outs.len());
    let mut imu_parts = Vec::with_capacity(outs.len());
    let mut emg_parts = Vec::with_capacity(outs.len());
    let mut angle_parts = Vec::with_capacity(outs.len());
    let mut sat_parts = Vec::with_capacity(outs.len());
    for (out, sample) in outs.iter().zip(samples) {
        let pose_t = g.constant(sample.pose_target.to_vec(), vec![1, sample.pose_target.len()]);
        let force_t = g.constant(sample.force_target.to_vec(), vec![1, sample.force_target.len()]);

        let p = g.mse(out.pose, pose_t)?;
        let f = g.mse(out.force, force_t)?;
        fused_parts.push(g.add(p, f)?);

        let p = g.mse(out.pose_imu, pose_t)?;
        let f = g.mse(out.force_imu, force_t)?;
        imu_parts.push(g.add(p, f)?);

        let p = g.mse(out.pose_emg, pose_t)?;
        let f = g.mse(out.force_emg, force_t)?;
        emg_parts.push(g.add(p, f)?);

        let pred_angles = g.angles_at_joints(out.pose, triples.clone())?;
        let target_angles = g.angles_at_joints(pose_t, triples.clone())?;
        angle_parts.push(g.mse(pred_angles, target_angles)?);

        if opts.saturation_weight > 0.0 {
            let over = g.affine(out.force, 1.0, -opts.saturation_limit);
            let over = g.relu(over);
            let over = g.square(over);
            sat_parts.push(g.mean_all(over));
        }
    }
    let fused = mean_of(g, &fused_parts)?;
    let imu = mean_of(g, &imu_parts)?;
    let emg = mean_of(g, &emg_parts)?;
    let angle = mean_of(g, &angle_parts)?;

    let smooth = if opts.smooth_weight > 0.0 {
        let mut pair_parts = Vec::new();
        for k in 0..outs.len() - 1 {
            if samples[k].trial_id == samples[k + 1].trial_id {
                let d = g.sub(outs[k + 1].force, outs[k].force)?;
                let d = g.square(d);
                pair_parts.push(g.mean_all(d));
            }
        }
        Some(if pair_parts.is_empty() {
            g.scalar(0.0)
        } else {
            mean_of(g, &pair_parts)?
        })
    } else {
        None
    };
    let saturation = if opts.saturation_weight > 0.0 {
        Some(mean_of(g, &sat_parts)?)
    } else {
        None
    };

    let mut total = fused;
    let term = g.scale(imu, w.lambda_imu);
    total = g.add(total, term)?;
    let term = g.scale(emg, w.lambda_emg);
    total = g.add(total, term)?;
    let term = g.scale(angle, w.lambda_angle);
    total = g.add(total, term)?;
    if let Some(s) = smooth {
        let term = g.scale(s, opts.smooth_weight);
        total = g.add(total, term)?;
    }
    if let Some(s) = saturation {
        let term = g.scale(s, opts.saturation_weight);
        total = g.add(total, term)?;
    }
    Ok(LossNodes {
        total,
        fused,
        imu,
        emg,
        angle,
        smooth,
        saturation,
    })
}

/// Value-level batch loss for reporting and evaluation. Runs the identical
/// graph construction on constants, so it agrees with the training loss to
/// the last bit.
pub fn batch_total_loss(
    outs: &[ModelOutput],
    samples: &[WindowedSample],
    w: &LossWeights,
    opts: &LossOptions,
) -> Result<LossBreakdown> {
    let mut g = Graph::new();
    let staged: Vec<SampleNodes> = outs
        .iter()
        .map(|out| {
            let mk = |g: &mut Graph, v: &[f64]| g.constant(v.to_vec(), vec![1, v.len()]);
            SampleNodes {
                pose: mk(&mut g, &out.pose),
                force: mk(&mut g, &out.force),
                pose_imu: mk(&mut g, &out.pose_imu),
                force_imu: mk(&mut g, &out.force_imu),
                pose_emg: mk(&mut g, &out.pose_emg),
                force_emg: mk(&mut g, &out.force_emg),
                attn_imu_query: Vec::new(),
                attn_emg_query: Vec::new(),
            }
        })
        .collect();
    let nodes = loss_nodes(&mut g, &staged, samples, w, opts)?;
    Ok(nodes.breakdown(&g))
}

/// Single-window convenience wrapper around [`batch_total_loss`].
pub fn total_loss(
    out: &ModelOutput,
    sample: &WindowedSample,
    w: &LossWeights,
    opts: &LossOptions,
) -> Result<LossBreakdown> {
    batch_total_loss(
        std::slice::from_ref(out),
        std::slice::from_ref(sample),
        w,
        opts,
    )
}
