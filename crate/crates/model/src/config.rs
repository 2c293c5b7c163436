//! Hyperparameters, ablation variants, and the component taxonomy used for
//! staged fine-tuning and checkpoint bookkeeping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// How the fused sequence collapses to one vector before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Average over the window's frames.
    Mean,
    /// Keep only the final frame's features.
    LastFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden width of every sequence stage.
    pub d_hidden: usize,
    /// Attention heads in both self- and cross-attention.
    pub heads: usize,
    /// Transformer encoder layers per branch.
    pub encoder_layers: usize,
    /// Stacked LSTM layers in the EMG stem.
    pub lstm_layers: usize,
    /// Stacked bidirectional cross-attention layers in the fusion stage.
    pub cross_layers: usize,
    /// Frames per input window.
    pub window: usize,
    /// IMU features per frame (ring + watch: 3-axis accel + 9-entry rotation each).
    pub imu_dim: usize,
    /// EMG features per frame (lag-expanded envelope).
    pub emg_dim: usize,
    /// Hand landmarks in the pose output (wrist + 4 per finger).
    pub n_joints: usize,
    /// Fingers with dedicated output units.
    pub n_fingers: usize,
    /// Feed-forward widening factor inside encoder and fusion blocks.
    pub ff_expansion: usize,
    /// Temporal width of the IMU convolution stem; odd so padding is centered.
    pub conv_width: usize,
    pub pooling: Pooling,
    /// Parameter-initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_hidden: 128,
            heads: 4,
            encoder_layers: 2,
            lstm_layers: 2,
            cross_layers: 2,
            window: 30,
            imu_dim: 24,
            emg_dim: 6,
            n_joints: 21,
            n_fingers: 5,
            ff_expansion: 4,
            conv_width: 5,
            pooling: Pooling::Mean,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.heads == 0 || self.d_hidden % self.heads != 0 {
            return bad(format!(
                "d_hidden {} must be divisible by heads {}",
                self.d_hidden, self.heads
            ));
        }
        if self.d_hidden % 2 != 0 {
            // The sinusoidal position table pairs sin/cos channels.
            return bad(format!("d_hidden {} must be even", self.d_hidden));
        }
        for (what, v) in [
            ("encoder_layers", self.encoder_layers),
            ("lstm_layers", self.lstm_layers),
            ("cross_layers", self.cross_layers),
            ("window", self.window),
            ("imu_dim", self.imu_dim),
            ("emg_dim", self.emg_dim),
            ("ff_expansion", self.ff_expansion),
        ] {
            if v == 0 {
                return bad(format!("{what} must be at least 1"));
            }
        }
        if self.n_fingers == 0 || self.n_fingers > 5 {
            return bad(format!("n_fingers {} outside 1..=5", self.n_fingers));
        }
        if self.n_joints != 1 + 4 * self.n_fingers {
            return bad(format!(
                "n_joints {} incompatible with {} fingers (wrist + 4 landmarks each)",
                self.n_joints, self.n_fingers
            ));
        }
        if self.conv_width % 2 == 0 {
            return bad(format!("conv_width {} must be odd", self.conv_width));
        }
        Ok(())
    }

    /// Flattened pose output width (x, y, z per landmark).
    pub fn pose_dim(&self) -> usize {
        3 * self.n_joints
    }
}

// ── Ablation variants ────────────────────────────────────────────────────

/// Which part of the network an evaluation run disables. Input-level zeroing
/// keeps parameter counts and output shapes identical across variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    /// EMG input replaced by zeros (its auxiliary loss is weighted out too).
    NoEmg,
    /// IMU input replaced by zeros.
    NoImu,
    /// Cross-attention skipped: branch latents are concatenated directly.
    NoCrossAttention,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Full,
        AblationVariant::NoEmg,
        AblationVariant::NoImu,
        AblationVariant::NoCrossAttention,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoEmg => "no_emg",
            AblationVariant::NoImu => "no_imu",
            AblationVariant::NoCrossAttention => "no_cross_attention",
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AblationVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown ablation variant '{s}'")))
    }
}

// ── Trainable components ─────────────────────────────────────────────────

/// Coarse parameter grouping: every parameter name starts with its
/// component's prefix, which is what stage-wise freezing keys on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    ImuEncoder,
    EmgEncoder,
    Fusion,
    PoseDecoder,
    ForceDecoder,
    AuxImu,
    AuxEmg,
}

impl Component {
    pub const ALL: [Component; 7] = [
        Component::ImuEncoder,
        Component::EmgEncoder,
        Component::Fusion,
        Component::PoseDecoder,
        Component::ForceDecoder,
        Component::AuxImu,
        Component::AuxEmg,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Component::ImuEncoder => "imu_encoder",
            Component::EmgEncoder => "emg_encoder",
            Component::Fusion => "fusion",
            Component::PoseDecoder => "pose_decoder",
            Component::ForceDecoder => "force_decoder",
            Component::AuxImu => "aux_imu",
            Component::AuxEmg => "aux_emg",
        }
    }

    /// Classify a parameter by the component owning it.
    pub fn of_param(name: &str) -> Option<Component> {
        let head = name.split('.').next().unwrap_or(name);
        Component::ALL.into_iter().find(|c| c.prefix() == head)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

impl FromStr for Component {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.prefix() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown component '{s}'")))
    }
}
