//! Two-device timestamp alignment onto a 30 Hz grid.
//!
//! The grid is anchored at the later stream's first sample. Each tick takes
//! the nearest sample per device within ±17 ms; a missing device holds its
//! last value for up to [`MAX_HOLD_TICKS`] consecutive ticks, after which
//! the frame is marked invalid and inference windows containing it are
//! skipped. Gaps are data, not errors.
//!
//! A tick is finalized only once both devices have produced a sample beyond
//! `tick + tolerance`, so no later packet can retroactively be nearer —
//! which is what makes the incremental path reproduce the batch path
//! exactly.

use std::time::Instant;

use crate::packet::{imu_features, Device, SensorPacket};

pub const SYNC_RATE_HZ: f64 = 30.0;
pub const SYNC_PERIOD_MS: f64 = 1000.0 / SYNC_RATE_HZ;
/// Half a grid period, rounded up to a whole millisecond.
pub const SYNC_TOLERANCE_MS: f64 = 17.0;
/// Consecutive ticks a device may coast on its last value.
pub const MAX_HOLD_TICKS: u32 = 3;

/// One 30 Hz grid tick with both devices' features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncedFrame {
    /// Grid time, ms, in the devices' timestamp clock.
    pub t_ms: f64,
    /// Ring accel + rotation (12 values).
    pub ring: [f64; 12],
    /// Watch accel + rotation (12 values).
    pub watch: [f64; 12],
    /// Raw EMG sample, mV (carried by watch packets).
    pub emg_mv: f64,
    /// Consecutive ticks the ring value has been held.
    pub held_ring: u32,
    /// Consecutive ticks the watch value has been held.
    pub held_watch: u32,
    /// False once either device held longer than [`MAX_HOLD_TICKS`] (or
    /// never delivered at all); invalid frames poison inference windows.
    pub valid: bool,
    /// Wall-clock arrival of the newest sample this frame depends on.
    pub arrival: Instant,
}

#[derive(Debug)]
struct DeviceLane<V> {
    buf: Vec<(f64, V, Instant)>,
    first_t: Option<f64>,
    newest_t: Option<f64>,
    last: Option<(V, Instant)>,
    held: u32,
}

impl<V: Copy> DeviceLane<V> {
    fn new() -> Self {
        DeviceLane {
            buf: Vec::new(),
            first_t: None,
            newest_t: None,
            last: None,
            held: 0,
        }
    }

    fn push(&mut self, t_ms: f64, value: V, arrival: Instant) {
        self.first_t.get_or_insert(t_ms);
        self.newest_t = Some(self.newest_t.map_or(t_ms, |n| n.max(t_ms)));
        self.buf.push((t_ms, value, arrival));
    }

    /// Nearest in-tolerance sample for the tick, if any; refreshes `last`.
    /// Keeps samples that may still serve later ticks.
    fn take_for_tick(&mut self, tick_ms: f64) -> bool {
        self.buf.retain(|(t, _, _)| *t >= tick_ms - SYNC_TOLERANCE_MS);
        let mut best: Option<usize> = None;
        for (i, (t, _, _)) in self.buf.iter().enumerate() {
            if (t - tick_ms).abs() <= SYNC_TOLERANCE_MS
                && best.is_none_or(|b| (t - tick_ms).abs() < (self.buf[b].0 - tick_ms).abs())
            {
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                self.last = Some((self.buf[i].1, self.buf[i].2));
                self.held = 0;
                true
            }
            None => {
                self.held += 1;
                false
            }
        }
    }
}

/// Incremental synchronizer; push per-device samples, poll for frames.
#[derive(Debug)]
pub struct Synchronizer {
    ring: DeviceLane<[f64; 12]>,
    watch: DeviceLane<([f64; 12], f64)>,
    tick: u64,
}

impl Default for Synchronizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Synchronizer {
    pub fn new() -> Self {
        Synchronizer {
            ring: DeviceLane::new(),
            watch: DeviceLane::new(),
            tick: 0,
        }
    }

    pub fn push_ring(&mut self, t_ms: f64, features: [f64; 12], arrival: Instant) {
        self.ring.push(t_ms, features, arrival);
    }

    pub fn push_watch(&mut self, t_ms: f64, features: [f64; 12], emg_mv: f64, arrival: Instant) {
        self.watch.push(t_ms, (features, emg_mv), arrival);
    }

    pub fn push_packet(&mut self, p: &SensorPacket, arrival: Instant) {
        let t_ms = p.timestamp_us as f64 / 1000.0;
        match p.device {
            Device::Ring => self.push_ring(t_ms, imu_features(p), arrival),
            Device::Watch => self.push_watch(t_ms, imu_features(p), p.emg_mv as f64, arrival),
        }
    }

    /// Grid origin: the later stream's first sample time.
    fn anchor(&self) -> Option<f64> {
        Some(self.ring.first_t?.max(self.watch.first_t?))
    }

    fn finalize_tick(&mut self, anchor: f64) -> SyncedFrame {
        let t_ms = anchor + self.tick as f64 * SYNC_PERIOD_MS;
        self.ring.take_for_tick(t_ms);
        self.watch.take_for_tick(t_ms);
        self.tick += 1;

        // A lane that never delivered leaves the frame invalid; the filler
        // arrival is never read off an invalid frame.
        let filler = Instant::now();
        let (ring, ring_arrival) = self.ring.last.unwrap_or(([0.0; 12], filler));
        let ((watch, emg_mv), watch_arrival) =
            self.watch.last.unwrap_or((([0.0; 12], 0.0), filler));
        let valid = self.ring.last.is_some()
            && self.watch.last.is_some()
            && self.ring.held <= MAX_HOLD_TICKS
            && self.watch.held <= MAX_HOLD_TICKS;
        SyncedFrame {
            t_ms,
            ring,
            watch,
            emg_mv,
            held_ring: self.ring.held,
            held_watch: self.watch.held,
            valid,
            arrival: ring_arrival.max(watch_arrival),
        }
    }

    /// Frames whose grid time can no longer be contested by future samples
    /// (both devices have moved past `tick + tolerance`).
    pub fn poll(&mut self) -> Vec<SyncedFrame> {
        let mut out = Vec::new();
        let Some(anchor) = self.anchor() else {
            return out;
        };
        while let (Some(nr), Some(nw)) = (self.ring.newest_t, self.watch.newest_t) {
            let t_ms = anchor + self.tick as f64 * SYNC_PERIOD_MS;
            if nr > t_ms + SYNC_TOLERANCE_MS && nw > t_ms + SYNC_TOLERANCE_MS {
                out.push(self.finalize_tick(anchor));
            } else {
                break;
            }
        }
        out
    }

    /// End of input: emit every remaining tick covered by the data.
    pub fn finish(mut self) -> Vec<SyncedFrame> {
        let mut out = Vec::new();
        let Some(anchor) = self.anchor() else {
            return out;
        };
        let end = match (self.ring.newest_t, self.watch.newest_t) {
            (Some(nr), Some(nw)) => nr.max(nw),
            _ => return out,
        };
        while anchor + self.tick as f64 * SYNC_PERIOD_MS <= end {
            out.push(self.finalize_tick(anchor));
        }
        out
    }
}

/// Batch alignment of already-decoded packets (timestamps monotone per
/// device): push everything, then drain.
pub fn synchronize(packets: impl IntoIterator<Item = SensorPacket>) -> Vec<SyncedFrame> {
    let now = Instant::now();
    let mut sync = Synchronizer::new();
    for p in packets {
        sync.push_packet(&p, now);
    }
    sync.finish()
}
