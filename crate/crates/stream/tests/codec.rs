//! Packet codec: round trips, CRC integrity, corruption taxonomy, and the
//! quaternion ↔ rotation-matrix conversions feeding the IMU features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stream::{
    crc32_ieee, decode_packet, encode_packet, imu_features, matrix_to_quat, quat_to_matrix,
    DecodeError, Device, SensorPacket, PACKET_LEN,
};

fn random_packet(rng: &mut ChaCha8Rng) -> SensorPacket {
    let q = random_unit_quat(rng);
    SensorPacket {
        device: if rng.gen() { Device::Ring } else { Device::Watch },
        seq: rng.gen(),
        timestamp_us: rng.gen_range(0..u64::MAX / 2),
        accel: [
            rng.gen_range(-40.0..40.0),
            rng.gen_range(-40.0..40.0),
            rng.gen_range(-40.0..40.0),
        ],
        quat: [q[0] as f32, q[1] as f32, q[2] as f32, q[3] as f32],
        emg_mv: rng.gen_range(0.0..5.0),
    }
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-3 {
            return q.map(|v| v / n);
        }
    }
}

#[test]
fn random_packets_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let p = random_packet(&mut rng);
        let bytes = encode_packet(&p);
        assert_eq!(bytes.len(), PACKET_LEN);
        let back = decode_packet(&bytes).expect("well-formed packet");
        assert_eq!(back, p);
    }
}

#[test]
fn every_corrupted_byte_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = random_packet(&mut rng);
    let clean = encode_packet(&p);
    for i in 0..PACKET_LEN {
        let mut bytes = clean;
        bytes[i] ^= 0xFF;
        assert!(
            decode_packet(&bytes).is_err(),
            "flipping byte {i} went unnoticed"
        );
    }
}

/// Rewrite the checksum so corruption elsewhere survives the CRC gate.
fn reseal(bytes: &mut [u8; PACKET_LEN]) {
    let crc = crc32_ieee(&bytes[..60]);
    bytes[60..64].copy_from_slice(&crc.to_le_bytes());
}

#[test]
fn each_corruption_class_reports_its_own_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_packet(&mut rng);
    let clean = encode_packet(&p);

    assert_eq!(
        decode_packet(&clean[..63]),
        Err(DecodeError::Length { got: 63 })
    );

    let mut bad_magic = clean;
    bad_magic[0] = b'X';
    reseal(&mut bad_magic);
    assert_eq!(
        decode_packet(&bad_magic),
        Err(DecodeError::Magic { got: [b'X', b'2'] })
    );

    let mut bad_version = clean;
    bad_version[2] = 9;
    reseal(&mut bad_version);
    assert_eq!(
        decode_packet(&bad_version),
        Err(DecodeError::Version { got: 9 })
    );

    let mut bad_device = clean;
    bad_device[3] = 7;
    reseal(&mut bad_device);
    assert_eq!(
        decode_packet(&bad_device),
        Err(DecodeError::Device { got: 7 })
    );

    let mut bad_crc = clean;
    bad_crc[20] ^= 0x01; // payload change without resealing
    let expected = crc32_ieee(&bad_crc[..60]);
    let got = u32::from_le_bytes(clean[60..64].try_into().unwrap());
    assert_eq!(decode_packet(&bad_crc), Err(DecodeError::Crc { expected, got }));

    let mut bad_quat = clean;
    for o in [28, 32, 36, 40] {
        bad_quat[o..o + 4].copy_from_slice(&0.6f32.to_le_bytes()); // norm 1.2
    }
    reseal(&mut bad_quat);
    assert!(matches!(
        decode_packet(&bad_quat),
        Err(DecodeError::Quaternion { .. })
    ));
}

#[test]
fn crc_matches_the_reference_vector() {
    // The classic IEEE 802.3 check value.
    assert_eq!(crc32_ieee(b"123456789"), 0xCBF4_3926);
    assert_eq!(crc32_ieee(b""), 0);
}

#[test]
fn identity_quaternion_is_the_identity_rotation() {
    let m = quat_to_matrix(&[1.0, 0.0, 0.0, 0.0]);
    let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    for (a, b) in m.iter().zip(eye) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn quaternion_and_matrix_round_trip_both_ways() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..500 {
        let q = random_unit_quat(&mut rng);
        let m = quat_to_matrix(&q);
        let back = matrix_to_quat(&m);
        // q and −q encode the same rotation; the decoder pins w ≥ 0.
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        for (a, b) in q.iter().zip(back) {
            assert!((sign * a - b).abs() < 1e-9, "quat {q:?} came back as {back:?}");
        }
        let m2 = quat_to_matrix(&back);
        for (a, b) in m.iter().zip(m2) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn rotation_matrices_stay_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let m = quat_to_matrix(&random_unit_quat(&mut rng));
        // Rows must be unit length and mutually orthogonal.
        for r in 0..3 {
            let row = &m[3 * r..3 * r + 3];
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let dot: f64 = (0..3).map(|c| m[3 * a + c] * m[3 * b + c]).sum();
            assert!(dot.abs() < 1e-12);
        }
        let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6]);
        assert!((det - 1.0).abs() < 1e-12, "determinant {det}");
    }
}

#[test]
fn imu_features_are_accel_then_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let p = random_packet(&mut rng);
    let f = imu_features(&p);
    for i in 0..3 {
        assert_eq!(f[i], p.accel[i] as f64);
    }
    let q = [
        p.quat[0] as f64,
        p.quat[1] as f64,
        p.quat[2] as f64,
        p.quat[3] as f64,
    ];
    let m = quat_to_matrix(&q);
    for i in 0..9 {
        assert_eq!(f[3 + i], m[i]);
    }
}
