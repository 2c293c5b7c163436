//! Finite-difference verification of the analytic backward pass.

use crate::{Graph, Result, TensorId};

/// Compare the analytic gradient of `build`'s scalar output against central
/// finite differences, perturbing every element of every listed leaf.
///
/// `build` receives the leaf values (one `Vec` per leaf, in the given shapes)
/// and must construct a fresh graph ending in a scalar loss, returning the
/// graph, the loss id and the leaf ids in the same order.
///
/// Returns the maximum relative error
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)` over all
/// elements of all leaves.
pub fn grad_check<F>(leaf_values: &[Vec<f64>], shapes: &[Vec<usize>], eps: f64, build: F) -> Result<f64>
where
    F: Fn(&[Vec<f64>]) -> Result<(Graph, TensorId, Vec<TensorId>)>,
{
    assert_eq!(leaf_values.len(), shapes.len(), "one shape per leaf");

    let (mut graph, loss, leaf_ids) = build(leaf_values)?;
    graph.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaf_ids
        .iter()
        .map(|&id| graph.grad(id).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; graph.node(id).numel()]))
        .collect();

    let mut worst: f64 = 0.0;
    let mut values: Vec<Vec<f64>> = leaf_values.to_vec();
    for li in 0..values.len() {
        for ei in 0..values[li].len() {
            let orig = values[li][ei];

            values[li][ei] = orig + eps;
            let (g_plus, loss_plus, _) = build(&values)?;
            let f_plus = g_plus.value(loss_plus);

            values[li][ei] = orig - eps;
            let (g_minus, loss_minus, _) = build(&values)?;
            let f_minus = g_minus.value(loss_minus);

            values[li][ei] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic[li][ei];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_passes() {
        // loss = sum(x²); analytic gradient 2x.
        let worst = grad_check(&[vec![0.7, -1.3, 2.1]], &[vec![3]], 1e-5, |vals| {
            let mut g = Graph::new();
            let x = g.leaf(vals[0].clone(), vec![3], true)?;
            let sq = g.square(x);
            let loss = g.sum_all(sq);
            Ok((g, loss, vec![x]))
        })
        .unwrap();
        assert!(worst < 1e-8, "worst relative error {worst}");
    }

    #[test]
    fn composite_tanh_matmul_passes() {
        // loss = mean(tanh(x·w)²) over a 2×3 input and 3×2 weight.
        let x0: Vec<f64> = vec![0.3, -0.7, 1.1, 0.2, 0.9, -0.4];
        let w0: Vec<f64> = vec![0.5, -0.2, 0.8, 0.1, -0.6, 0.4];
        let worst = grad_check(&[x0, w0], &[vec![2, 3], vec![3, 2]], 1e-5, |vals| {
            let mut g = Graph::new();
            let x = g.leaf(vals[0].clone(), vec![2, 3], true)?;
            let w = g.leaf(vals[1].clone(), vec![3, 2], true)?;
            let y = g.matmul(x, w)?;
            let t = g.tanh(y);
            let sq = g.square(t);
            let loss = g.mean_all(sq);
            Ok((g, loss, vec![x, w]))
        })
        .unwrap();
        assert!(worst < 1e-7, "worst relative error {worst}");
    }
}
