//! Interior joint angles of the 21-landmark hand — the quantity behind the
//! anatomical angle loss and the angle-difference metric.

use std::sync::{Arc, OnceLock};

use synthhand::{LANDMARKS, N_FINGERS};

use crate::{ModelError, Result};

/// MCP, PIP, and DIP angles for each finger.
pub const INTERIOR_ANGLES: usize = 3 * N_FINGERS;

/// (previous, joint, next) landmark triples, finger-major. The wrist anchors
/// each finger's MCP angle; the remaining two sit along the finger chain.
pub fn angle_triples() -> Vec<[usize; 3]> {
    let mut triples = Vec::with_capacity(INTERIOR_ANGLES);
    for f in 0..N_FINGERS {
        let base = 1 + 4 * f;
        triples.push([0, base, base + 1]);
        triples.push([base, base + 1, base + 2]);
        triples.push([base + 1, base + 2, base + 3]);
    }
    triples
}

/// Shared copy for graph nodes, so repeated loss construction doesn't
/// re-allocate the table.
pub(crate) fn shared_triples() -> Arc<Vec<[usize; 3]>> {
    static TABLE: OnceLock<Arc<Vec<[usize; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| Arc::new(angle_triples())).clone()
}

/// Angle at each interior joint: the angle in [0, π] between the incoming
/// bone (previous − joint) and the outgoing bone (next − joint). A fully
/// straight chain reads π; a right-angle bend reads π/2.
pub fn joint_angles_from_pose(pose: &[f64]) -> Result<[f64; INTERIOR_ANGLES]> {
    if pose.len() != 3 * LANDMARKS {
        return Err(ModelError::Shape {
            what: "pose",
            expected: format!("{} values", 3 * LANDMARKS),
            got: format!("{} values", pose.len()),
        });
    }
    let at = |i: usize| [pose[3 * i], pose[3 * i + 1], pose[3 * i + 2]];
    let mut out = [0.0; INTERIOR_ANGLES];
    for (slot, [p, m, q]) in angle_triples().into_iter().enumerate() {
        let (pp, mm, qq) = (at(p), at(m), at(q));
        let u = [pp[0] - mm[0], pp[1] - mm[1], pp[2] - mm[2]];
        let v = [qq[0] - mm[0], qq[1] - mm[1], qq[2] - mm[2]];
        let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if nu == 0.0 || nv == 0.0 {
            return Err(ModelError::DegeneratePose(format!(
                "coincident landmarks around joint {m} (triple {p},{m},{q})"
            )));
        }
        let cos = ((u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv)).clamp(-1.0, 1.0);
        out[slot] = cos.acos();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    #[test]
    fn triples_walk_each_finger_chain() {
        let t = angle_triples();
        assert_eq!(t.len(), INTERIOR_ANGLES);
        for (f, chunk) in t.chunks(3).enumerate() {
            let base = 1 + 4 * f;
            assert_eq!(chunk[0], [0, base, base + 1]);
            assert_eq!(chunk[1], [base, base + 1, base + 2]);
            assert_eq!(chunk[2], [base + 1, base + 2, base + 3]);
        }
    }

    #[test]
    fn collinear_chain_reads_pi() {
        // Each landmark further along +x: every interior angle is straight.
        let mut pose = [0.0; 63];
        for i in 0..21 {
            pose[3 * i] = i as f64;
        }
        let angles = joint_angles_from_pose(&pose).unwrap();
        for a in angles {
            assert_eq!(a, PI);
        }
    }

    #[test]
    fn right_angle_bend_reads_half_pi() {
        let mut pose = [0.0; 63];
        for i in 0..21 {
            pose[3 * i] = i as f64;
        }
        // Bend the index PIP (landmark 6): its outgoing bone turns +y.
        pose[3 * 7] = pose[3 * 6]; // landmark 7 directly above landmark 6
        pose[3 * 7 + 1] = 1.0;
        pose[3 * 8] = pose[3 * 6];
        pose[3 * 8 + 1] = 2.0;
        let angles = joint_angles_from_pose(&pose).unwrap();
        // Index finger is f=1, PIP is its middle entry.
        assert!((angles[4] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn coincident_landmarks_are_degenerate() {
        let pose = [0.0; 63];
        assert!(matches!(
            joint_angles_from_pose(&pose),
            Err(ModelError::DegeneratePose(_))
        ));
    }

    #[test]
    fn wrong_length_is_a_shape_error() {
        assert!(matches!(
            joint_angles_from_pose(&[0.0; 10]),
            Err(ModelError::Shape { .. })
        ));
    }
}
