//! The live path from sensor packets to streamed predictions: a bit-exact
//! 64-byte packet codec, two-device timestamp synchronization onto a 30 Hz
//! grid, causal per-frame feature extraction that matches the offline
//! pipeline, a three-stage serving loop, a replay client standing in for
//! the BLE hardware, and latency accounting.
//!
//! Everything downstream of the codec is deterministic given the packet
//! bytes, which is what makes online/offline equivalence testable: batch
//! processing the same synced frames must reproduce the served predictions.

use thiserror::Error;

mod features;
mod latency;
mod packet;
mod replay;
mod serve;
mod sync;

pub use features::{features_from_frames, FeatureFrame, FramePreprocessor, WindowAssembler};
pub use latency::{latency_stats, LatencyStats};
pub use packet::{
    crc32_ieee, decode_packet, encode_packet, imu_features, matrix_to_quat, quat_to_matrix,
    Device, SensorPacket, PACKET_LEN, PACKET_MAGIC, PROTOCOL_VERSION,
};
pub use replay::{replay_trial, ReplayOptions, ReplayStats, PACKET_RATE_HZ};
pub use serve::{serve, EmitFormat, Prediction, ServeOptions, ServeReport};
pub use sync::{
    synchronize, SyncedFrame, Synchronizer, MAX_HOLD_TICKS, SYNC_PERIOD_MS, SYNC_RATE_HZ,
    SYNC_TOLERANCE_MS,
};

/// Decode failures are split per corruption class so transport bugs are
/// tellable apart from data corruption at a glance.
#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("packet length {got}, expected {PACKET_LEN}")]
    Length { got: usize },
    #[error("bad magic {got:?}, expected {PACKET_MAGIC:?}")]
    Magic { got: [u8; 2] },
    #[error("unsupported protocol version {got}")]
    Version { got: u8 },
    #[error("unknown device byte {got}")]
    Device { got: u8 },
    #[error("crc mismatch: stored {got:#010x}, computed {expected:#010x}")]
    Crc { expected: u32, got: u32 },
    #[error("quaternion norm {norm} outside [0.99, 1.01]")]
    Quaternion { norm: f64 },
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("invalid usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StreamError>;
