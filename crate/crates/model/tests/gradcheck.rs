//! Central finite differences against the analytic gradient of the full
//! composite loss, perturbing every element of every parameter on a reduced
//! configuration. Smoothness and saturation terms are switched on so the
//! whole loss surface is exercised.

use std::time::Instant;

use model::{build, loss_nodes, AblationVariant, LossOptions, LossWeights, ModelConfig, PoseForceNet};
use pipeline::WindowedSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthhand::{flatten_pose, forward_kinematics, HandSkeleton, JointAngles};
use tensorgrad::Graph;

const EPS: f64 = 1e-5;
/// Relative agreement demanded where the gradient is of healthy magnitude.
const REL_TOL: f64 = 1e-4;
/// Below this magnitude a relative measure would be dominated by the
/// floating-point noise of the central difference itself (a ~1e-9 absolute
/// floor for an O(1) loss), so near-zero gradients are compared absolutely.
const REL_FLOOR: f64 = 1e-3;
const ABS_TOL: f64 = 1e-7;

fn reduced_config() -> ModelConfig {
    ModelConfig {
        d_hidden: 8,
        heads: 2,
        window: 6,
        ..ModelConfig::default()
    }
}

fn bent_pose(flex: f64) -> [f64; 63] {
    let mut fingers = [[0.0; 4]; 5];
    for f in fingers.iter_mut() {
        *f = [flex, flex * 1.1, flex * 0.7, 0.05];
    }
    let skeleton = HandSkeleton::for_hand_length(18.0).unwrap();
    flatten_pose(&forward_kinematics(&JointAngles { fingers }, &skeleton).unwrap())
}

/// Re-aim every pose head at a clearly bent pose. Near a straight finger the
/// interior angle sits at the edge of acos's domain where its curvature
/// explodes, which would wreck the finite-difference comparison for reasons
/// that have nothing to do with the backward pass.
fn bias_heads_to_bent(net: &mut PoseForceNet, pose: &[f64; 63]) {
    for prefix in ["pose_decoder", "aux_imu.pose", "aux_emg.pose"] {
        net.params_mut().set_data(&format!("{prefix}.wrist.b"), pose[..3].to_vec()).unwrap();
        for (f, name) in ["thumb", "index", "middle", "ring", "little"].iter().enumerate() {
            net.params_mut()
                .set_data(&format!("{prefix}.{name}.b"), pose[3 + 12 * f..15 + 12 * f].to_vec())
                .unwrap();
        }
    }
}

fn two_windows(cfg: &ModelConfig) -> Vec<WindowedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let skeleton = HandSkeleton::for_hand_length(17.0).unwrap();
    (0..2)
        .map(|k| {
            let mut fingers = [[0.0; 4]; 5];
            for f in fingers.iter_mut() {
                *f = [
                    rng.gen_range(0.4..0.9),
                    rng.gen_range(0.4..0.9),
                    rng.gen_range(0.3..0.6),
                    rng.gen_range(-0.1..0.1),
                ];
            }
            let pose = flatten_pose(&forward_kinematics(&JointAngles { fingers }, &skeleton).unwrap());
            let mut force = [0.0; 5];
            for f in force.iter_mut() {
                *f = rng.gen_range(0.2..0.9);
            }
            WindowedSample {
                imu: (0..cfg.window * cfg.imu_dim).map(|_| rng.gen_range(-0.8..0.8)).collect(),
                emg: (0..cfg.window * cfg.emg_dim).map(|_| rng.gen_range(-0.8..0.8)).collect(),
                pose_target: pose,
                force_target: force,
                user_id: 1,
                gesture_id: 1,
                rep: k,
                trial_id: 55, // same trial → the smoothness pair is active
                t_end_ms: k as f64 * 33.0,
            }
        })
        .collect()
}

fn eval_total(
    net: &PoseForceNet,
    samples: &[WindowedSample],
    w: &LossWeights,
    opts: &LossOptions,
) -> f64 {
    let mut g = Graph::new();
    let b = net.bind_inference(&mut g).unwrap();
    let nodes: Vec<_> = samples
        .iter()
        .map(|s| net.forward_window(&mut g, &b, s, AblationVariant::Full).unwrap())
        .collect();
    let loss = loss_nodes(&mut g, &nodes, samples, w, opts).unwrap();
    g.value(loss.total)
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let started = Instant::now();
    let cfg = reduced_config();
    let mut net = build(cfg.clone()).unwrap();
    bias_heads_to_bent(&mut net, &bent_pose(0.8));
    let samples = two_windows(&cfg);
    let w = LossWeights::default();
    let opts = LossOptions {
        smooth_weight: 0.7,
        saturation_weight: 0.9,
        saturation_limit: 0.05,
    };

    // Analytic gradients from one trainable-bound graph.
    let mut g = Graph::new();
    let b = net.bind(&mut g).unwrap();
    let nodes: Vec<_> = samples
        .iter()
        .map(|s| net.forward_window(&mut g, &b, s, AblationVariant::Full).unwrap())
        .collect();
    let loss = loss_nodes(&mut g, &nodes, &samples, &w, &opts).unwrap();

    // The saturation hinge must not sit on its kink for any force output, or
    // the central difference would straddle a non-differentiable point.
    for n in &nodes {
        for &f in g.data(n.force) {
            assert!(
                (f - opts.saturation_limit).abs() > 1e-3,
                "force output {f} too close to the saturation limit for a clean check"
            );
        }
    }

    g.backward(loss.total).unwrap();
    let names: Vec<String> = net.params().names().map(str::to_owned).collect();
    let analytic: Vec<Vec<f64>> = names
        .iter()
        .map(|n| g.grad(b.id(n)).expect("trainable leaf has a gradient").to_vec())
        .collect();
    drop(g);

    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut checked = 0usize;
    for (name, grads) in names.iter().zip(&analytic) {
        for i in 0..grads.len() {
            let orig = net.params().get(name).unwrap().data[i];

            net.params_mut().data_mut(name).unwrap()[i] = orig + EPS;
            let plus = eval_total(&net, &samples, &w, &opts);
            net.params_mut().data_mut(name).unwrap()[i] = orig - EPS;
            let minus = eval_total(&net, &samples, &w, &opts);
            net.params_mut().data_mut(name).unwrap()[i] = orig;

            let numeric = (plus - minus) / (2.0 * EPS);
            let a = grads[i];
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            if scale >= REL_FLOOR {
                let rel = diff / scale;
                assert!(
                    rel < REL_TOL,
                    "{name}[{i}]: analytic {a} vs numeric {numeric} (rel {rel:.3e})"
                );
                worst_rel = worst_rel.max(rel);
            } else {
                assert!(
                    diff < ABS_TOL,
                    "{name}[{i}]: analytic {a} vs numeric {numeric} (abs {diff:.3e})"
                );
                worst_abs = worst_abs.max(diff);
            }
            checked += 1;
        }
    }

    let elapsed = started.elapsed();
    eprintln!(
        "checked {checked} coordinates in {:.1}s: worst relative {worst_rel:.3e}, worst near-zero absolute {worst_abs:.3e}",
        elapsed.as_secs_f64()
    );
    assert!(checked > 9000, "expected to sweep every parameter, got {checked}");
    assert!(
        elapsed.as_secs() < 120,
        "gradient sweep took {elapsed:?}, budget is two minutes"
    );
}

#[test]
fn gradients_flow_to_every_component() {
    // Sanity companion to the sweep: with the composite loss, no component's
    // parameters should be uniformly gradient-free.
    let cfg = reduced_config();
    let mut net = build(cfg.clone()).unwrap();
    bias_heads_to_bent(&mut net, &bent_pose(0.8));
    let samples = two_windows(&cfg);
    let mut g = Graph::new();
    let b = net.bind(&mut g).unwrap();
    let nodes: Vec<_> = samples
        .iter()
        .map(|s| net.forward_window(&mut g, &b, s, AblationVariant::Full).unwrap())
        .collect();
    let loss = loss_nodes(&mut g, &nodes, &samples, &LossWeights::default(), &LossOptions::default()).unwrap();
    g.backward(loss.total).unwrap();

    for component in model::Component::ALL {
        let live = net
            .params()
            .names()
            .filter(|n| model::Component::of_param(n) == Some(component))
            .any(|n| g.grad(b.id(n)).is_some_and(|gr| gr.iter().any(|&v| v != 0.0)));
        assert!(live, "no gradient reached any parameter of {component}");
    }
}
