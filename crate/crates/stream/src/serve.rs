//! The serving loop: ingest/decode → synchronize → infer/emit, three
//! stages over bounded queues. When a queue fills, the producer discards
//! the oldest queued item (freshness beats completeness live) and counts
//! the drop. Decode and model failures are logged and skipped; the stream
//! keeps running until the input ends.

use std::io::{ErrorKind, Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};
use model::{AblationVariant, PoseForceNet};
use pipeline::{denormalize_force, CalibrationProfile, NormalizationSpec, WINDOW_SIZE};
use serde::Serialize;

use crate::features::{FramePreprocessor, WindowAssembler};
use crate::latency::{latency_stats, LatencyStats};
use crate::packet::{decode_packet, PACKET_LEN};
use crate::sync::{SyncedFrame, Synchronizer};
use crate::{Result, StreamError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    /// One JSON object per line (default).
    Jsonl,
    /// `"PR"` magic + 70 little-endian f64: t_ms, 63 pose, 5 force,
    /// latency_ms. 562 bytes per prediction.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeOptions {
    pub format: EmitFormat,
    /// Capacity of each inter-stage queue.
    pub queue_capacity: usize,
    /// Interval for rolling latency log lines.
    pub stats_every: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            format: EmitFormat::Jsonl,
            queue_capacity: 256,
            stats_every: Duration::from_secs(5),
        }
    }
}

/// One emitted prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// Grid time of the newest frame in the window, ms (device clock).
    pub t_ms: f64,
    /// 63 wrist-origin landmark coordinates, cm.
    pub pose_cm: Vec<f64>,
    /// Denormalized per-finger force, newtons.
    pub force_n: [f64; 5],
    /// Emit instant minus the newest contributing sample's arrival.
    pub latency_ms: f64,
    /// Forward-pass wall time alone.
    pub inference_ms: f64,
}

#[derive(Debug)]
pub struct ServeReport {
    pub predictions: Vec<Prediction>,
    /// Synced frames that reached the inference stage.
    pub frames: usize,
    pub valid_frames: usize,
    /// On-grid windows skipped because they contained invalid frames.
    pub windows_skipped: usize,
    pub decode_errors: usize,
    /// Items discarded by queue backpressure.
    pub dropped: usize,
    pub model_errors: usize,
    pub end_to_end: Option<LatencyStats>,
    pub inference: Option<LatencyStats>,
}

/// Run the staged pipeline until the input transport ends. The network must
/// be a 30-frame, 24-IMU/6-EMG configuration (the packet layout fixes the
/// feature widths).
pub fn serve(
    net: &PoseForceNet,
    norm: &NormalizationSpec,
    cal: &CalibrationProfile,
    input: impl Read + Send,
    out: &mut dyn Write,
    opts: &ServeOptions,
) -> Result<ServeReport> {
    let cfg = net.config();
    if cfg.window != WINDOW_SIZE || cfg.imu_dim != 24 || cfg.emg_dim != 6 {
        return Err(StreamError::Usage(format!(
            "network shape {}×({} imu, {} emg) does not match the stream layout {}×(24, 6)",
            cfg.window, cfg.imu_dim, cfg.emg_dim, WINDOW_SIZE
        )));
    }
    if opts.queue_capacity == 0 {
        return Err(StreamError::Usage("queue capacity must be ≥ 1".into()));
    }

    let (pkt_tx, pkt_rx) = bounded::<(crate::SensorPacket, Instant)>(opts.queue_capacity);
    let (frame_tx, frame_rx) = bounded::<SyncedFrame>(opts.queue_capacity);
    let decode_errors = AtomicUsize::new(0);
    let dropped = AtomicUsize::new(0);

    let mut report = std::thread::scope(|s| -> Result<ServeReport> {
        // Stage A: ingest and decode.
        let pkt_rx_steal = pkt_rx.clone();
        s.spawn({
            let decode_errors = &decode_errors;
            let dropped = &dropped;
            move || {
                let mut input = input;
                let mut buf = [0u8; PACKET_LEN];
                loop {
                    match read_packet(&mut input, &mut buf) {
                        Ok(true) => match decode_packet(&buf) {
                            Ok(p) => send_drop_oldest(
                                &pkt_tx,
                                &pkt_rx_steal,
                                (p, Instant::now()),
                                dropped,
                            ),
                            Err(e) => {
                                decode_errors.fetch_add(1, Ordering::Relaxed);
                                log::warn!("dropping undecodable packet: {e}");
                            }
                        },
                        Ok(false) => break,
                        Err(e) => {
                            log::error!("input transport failed: {e}");
                            break;
                        }
                    }
                }
                drop(pkt_tx);
            }
        });

        // Stage B: synchronize onto the 30 Hz grid.
        let frame_rx_steal = frame_rx.clone();
        s.spawn({
            let dropped = &dropped;
            move || {
                let mut sync = Synchronizer::new();
                for (packet, arrival) in pkt_rx.iter() {
                    sync.push_packet(&packet, arrival);
                    for frame in sync.poll() {
                        send_drop_oldest(&frame_tx, &frame_rx_steal, frame, dropped);
                    }
                }
                for frame in sync.finish() {
                    send_drop_oldest(&frame_tx, &frame_rx_steal, frame, dropped);
                }
                drop(frame_tx);
            }
        });

        // Stage C: causal features, windowing, inference, emission.
        Ok(infer_loop(net, norm, cal, frame_rx, out, opts))
    })?;

    report.decode_errors = decode_errors.load(Ordering::Relaxed);
    report.dropped = dropped.load(Ordering::Relaxed);
    if !report.predictions.is_empty() {
        let e2e: Vec<f64> = report.predictions.iter().map(|p| p.latency_ms).collect();
        let inf: Vec<f64> = report.predictions.iter().map(|p| p.inference_ms).collect();
        report.end_to_end = Some(latency_stats(&e2e)?);
        report.inference = Some(latency_stats(&inf)?);
    }
    Ok(report)
}

fn infer_loop(
    net: &PoseForceNet,
    norm: &NormalizationSpec,
    cal: &CalibrationProfile,
    frames: Receiver<SyncedFrame>,
    out: &mut dyn Write,
    opts: &ServeOptions,
) -> ServeReport {
    let mut report = ServeReport {
        predictions: Vec::new(),
        frames: 0,
        valid_frames: 0,
        windows_skipped: 0,
        decode_errors: 0,
        dropped: 0,
        model_errors: 0,
        end_to_end: None,
        inference: None,
    };
    let mut preproc = FramePreprocessor::new(*cal);
    let mut assembler = WindowAssembler::new(cal.user_id);
    let mut last_log = Instant::now();

    for frame in frames.iter() {
        report.frames += 1;
        report.valid_frames += frame.valid as usize;
        let features = preproc.push(&frame);
        let on_grid = {
            let n = assembler.frames() + 1;
            n >= WINDOW_SIZE && (n - WINDOW_SIZE) % pipeline::WINDOW_STEP == 0
        };
        let Some(window) = assembler.push(features) else {
            report.windows_skipped += on_grid as usize;
            continue;
        };

        let t0 = Instant::now();
        let output = match net.predict(&window, AblationVariant::Full) {
            Ok(o) => o,
            Err(e) => {
                report.model_errors += 1;
                log::error!("inference failed at t={} ms: {e}", window.t_end_ms);
                continue;
            }
        };
        let inference_ms = t0.elapsed().as_secs_f64() * 1e3;
        let force: [f64; 5] = output.force.as_slice().try_into().expect("5 forces");
        let prediction = Prediction {
            t_ms: window.t_end_ms,
            pose_cm: output.pose,
            force_n: denormalize_force(&force, norm),
            latency_ms: frame.arrival.elapsed().as_secs_f64() * 1e3,
            inference_ms,
        };
        if let Err(e) = emit(out, &prediction, opts.format) {
            log::error!("output transport failed: {e}");
        }
        report.predictions.push(prediction);

        if last_log.elapsed() >= opts.stats_every {
            let recent: Vec<f64> = report.predictions.iter().map(|p| p.latency_ms).collect();
            if let Ok(stats) = latency_stats(&recent) {
                log::info!(
                    "latency p50 {:.1} ms, p95 {:.1} ms, max {:.1} ms over {} predictions",
                    stats.p50_ms,
                    stats.p95_ms,
                    stats.max_ms,
                    stats.samples
                );
            }
            last_log = Instant::now();
        }
    }
    report
}

fn emit(out: &mut dyn Write, p: &Prediction, format: EmitFormat) -> std::io::Result<()> {
    match format {
        EmitFormat::Jsonl => {
            serde_json::to_writer(&mut *out, p)?;
            out.write_all(b"\n")?;
        }
        EmitFormat::Binary => {
            let mut buf = Vec::with_capacity(2 + 70 * 8);
            buf.extend_from_slice(b"PR");
            for v in std::iter::once(p.t_ms)
                .chain(p.pose_cm.iter().copied())
                .chain(p.force_n)
                .chain(std::iter::once(p.latency_ms))
            {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
    }
    out.flush()
}

/// Bounded-queue send that discards the oldest queued item when full.
fn send_drop_oldest<T>(tx: &Sender<T>, rx: &Receiver<T>, mut item: T, dropped: &AtomicUsize) {
    loop {
        match tx.try_send(item) {
            Ok(()) => return,
            Err(crossbeam_channel::TrySendError::Full(back)) => {
                if rx.try_recv().is_ok() {
                    dropped.fetch_add(1, Ordering::Relaxed);
                }
                item = back;
            }
            Err(crossbeam_channel::TrySendError::Disconnected(_)) => return,
        }
    }
}

/// Read one 64-byte packet; `Ok(false)` on a clean end-of-stream. A
/// truncated trailing packet is reported as an error.
fn read_packet(input: &mut impl Read, buf: &mut [u8; PACKET_LEN]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < PACKET_LEN {
        match input.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(std::io::Error::new(
                    ErrorKind::UnexpectedEof,
                    format!("stream ended mid-packet ({filled} of {PACKET_LEN} bytes)"),
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}
