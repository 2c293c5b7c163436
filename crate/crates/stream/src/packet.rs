//! The 64-byte wire format, little-endian throughout:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 2    | magic `"W2"`                           |
//! | 2      | 1    | protocol version                       |
//! | 3      | 1    | device (0 = ring, 1 = watch)           |
//! | 4      | 4    | sequence number, u32                   |
//! | 8      | 8    | timestamp, µs, u64                     |
//! | 16     | 12   | acceleration, 3×f32, m/s²              |
//! | 28     | 16   | orientation quaternion (w,x,y,z), 4×f32|
//! | 44     | 4    | EMG, f32, mV (watch only, ring sends 0)|
//! | 48     | 12   | reserved, zeros                        |
//! | 60     | 4    | CRC-32 (IEEE) over bytes 0..60         |
//!
//! A quaternion on the wire keeps the packet inside its 64-byte budget; it
//! expands losslessly to the 9-value rotation matrix at ingest.

use crate::DecodeError;

pub const PACKET_LEN: usize = 64;
pub const PACKET_MAGIC: [u8; 2] = *b"W2";
pub const PROTOCOL_VERSION: u8 = 1;

const CRC_END: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Device {
    Ring = 0,
    Watch = 1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPacket {
    pub device: Device,
    pub seq: u32,
    pub timestamp_us: u64,
    pub accel: [f32; 3],
    /// Orientation as (w, x, y, z); must be within 1% of unit norm.
    pub quat: [f32; 4],
    pub emg_mv: f32,
}

pub fn encode_packet(p: &SensorPacket) -> [u8; PACKET_LEN] {
    let mut b = [0u8; PACKET_LEN];
    b[0..2].copy_from_slice(&PACKET_MAGIC);
    b[2] = PROTOCOL_VERSION;
    b[3] = p.device as u8;
    b[4..8].copy_from_slice(&p.seq.to_le_bytes());
    b[8..16].copy_from_slice(&p.timestamp_us.to_le_bytes());
    for (i, a) in p.accel.iter().enumerate() {
        b[16 + 4 * i..20 + 4 * i].copy_from_slice(&a.to_le_bytes());
    }
    for (i, q) in p.quat.iter().enumerate() {
        b[28 + 4 * i..32 + 4 * i].copy_from_slice(&q.to_le_bytes());
    }
    b[44..48].copy_from_slice(&p.emg_mv.to_le_bytes());
    // 48..60 reserved, already zero.
    let crc = crc32_ieee(&b[..CRC_END]);
    b[60..64].copy_from_slice(&crc.to_le_bytes());
    b
}

pub fn decode_packet(bytes: &[u8]) -> Result<SensorPacket, DecodeError> {
    if bytes.len() != PACKET_LEN {
        return Err(DecodeError::Length { got: bytes.len() });
    }
    if bytes[0..2] != PACKET_MAGIC {
        return Err(DecodeError::Magic {
            got: [bytes[0], bytes[1]],
        });
    }
    if bytes[2] != PROTOCOL_VERSION {
        return Err(DecodeError::Version { got: bytes[2] });
    }
    let device = match bytes[3] {
        0 => Device::Ring,
        1 => Device::Watch,
        got => return Err(DecodeError::Device { got }),
    };
    let got = u32::from_le_bytes(bytes[60..64].try_into().expect("4 bytes"));
    let expected = crc32_ieee(&bytes[..CRC_END]);
    if got != expected {
        return Err(DecodeError::Crc { expected, got });
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let quat = [f32_at(28), f32_at(32), f32_at(36), f32_at(40)];
    let norm = quat.iter().map(|&q| q as f64 * q as f64).sum::<f64>().sqrt();
    if !(0.99..=1.01).contains(&norm) {
        return Err(DecodeError::Quaternion { norm });
    }
    Ok(SensorPacket {
        device,
        seq: u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")),
        timestamp_us: u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")),
        accel: [f32_at(16), f32_at(20), f32_at(24)],
        quat,
        emg_mv: f32_at(44),
    })
}

/// The 12 model-facing IMU features of one packet: acceleration then the
/// row-major rotation matrix expanded from the (renormalized) quaternion.
pub fn imu_features(p: &SensorPacket) -> [f64; 12] {
    let rot = quat_to_matrix(&[
        p.quat[0] as f64,
        p.quat[1] as f64,
        p.quat[2] as f64,
        p.quat[3] as f64,
    ]);
    let mut out = [0.0; 12];
    out[0] = p.accel[0] as f64;
    out[1] = p.accel[1] as f64;
    out[2] = p.accel[2] as f64;
    out[3..].copy_from_slice(&rot);
    out
}

// ── Rotation conversions ─────────────────────────────────────────────────

/// Row-major rotation matrix of a (w,x,y,z) quaternion. The input is
/// normalized first, so wire-format rounding cannot skew the matrix.
pub fn quat_to_matrix(q: &[f64; 4]) -> [f64; 9] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Quaternion (w,x,y,z, w ≥ 0) of a row-major rotation matrix, by the
/// largest-pivot rule so near-180° rotations stay well conditioned.
pub fn matrix_to_quat(m: &[f64; 9]) -> [f64; 4] {
    let trace = m[0] + m[4] + m[8];
    let mut q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        [0.25 * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s]
    } else if m[0] > m[4] && m[0] > m[8] {
        let s = (1.0 + m[0] - m[4] - m[8]).sqrt() * 2.0;
        [(m[7] - m[5]) / s, 0.25 * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s]
    } else if m[4] > m[8] {
        let s = (1.0 + m[4] - m[0] - m[8]).sqrt() * 2.0;
        [(m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25 * s, (m[5] + m[7]) / s]
    } else {
        let s = (1.0 + m[8] - m[0] - m[4]).sqrt() * 2.0;
        [(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25 * s]
    };
    if q[0] < 0.0 {
        for v in q.iter_mut() {
            *v = -*v;
        }
    }
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

// ── CRC-32 (IEEE 802.3) ──────────────────────────────────────────────────

/// Reflected CRC-32, polynomial 0xEDB88320, init and final xor all-ones —
/// the zlib/Ethernet variant. `crc32_ieee(b"123456789") == 0xCBF43926`.
pub fn crc32_ieee(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc = (crc >> 8) ^ CRC_TABLE[((crc ^ b as u32) & 0xFF) as usize];
    }
    !crc
}

const CRC_TABLE: [u32; 256] = build_crc_table();

const fn build_crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}
