//! The computation graph: an arena of tensor nodes recorded in topological
//! order, with hand-written adjoints for every operation.

use std::sync::Arc;

use crate::kernels::{axpy, matmul_nn_acc, matmul_nt_acc, matmul_tn_acc};
use crate::{numel, Result, TensorError};

/// Handle to a node inside a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub usize);

/// Padding mode for [`Graph::conv1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad so that stride 1 preserves the time length.
    Same,
    /// No padding; output shrinks by `kernel_width - 1`.
    Valid,
}

/// One node of the graph. Leaves hold inputs or parameters; interior nodes
/// hold the result of the recorded [`Op`].
#[derive(Debug, Clone)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Arc<Vec<f64>>,
    pub requires_grad: bool,
    /// Populated by [`Graph::backward`] for nodes with `requires_grad`.
    pub grad: Option<Vec<f64>>,
    pub(crate) op: Op,
    /// True when this node's value depends on at least one `requires_grad`
    /// leaf; backward skips everything else.
    pub(crate) needs_grad: bool,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        numel(&self.shape)
    }
}

/// Cached activations for one LSTM layer, saved during the forward pass so
/// backward can replay the gate equations without recomputation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_g: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
}

/// Recorded operation of one graph node.
#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    /// a*x + b, elementwise with scalar coefficients.
    Affine {
        x: TensorId,
        a: f64,
        b: f64,
    },
    /// Broadcast-add a length-n vector to every row of an m×n tensor.
    AddRow {
        x: TensorId,
        v: TensorId,
    },
    Matmul(TensorId, TensorId),
    /// a[m,k] · b[n,k]ᵀ
    MatmulNT(TensorId, TensorId),
    Relu(TensorId),
    Tanh(TensorId),
    Sigmoid(TensorId),
    Square(TensorId),
    Ln(TensorId),
    Softmax {
        x: TensorId,
        axis: usize,
    },
    LayerNorm {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        eps: f64,
    },
    Conv1d {
        x: TensorId,
        kernel: TensorId,
        stride: usize,
        pad_left: usize,
    },
    Lstm {
        x: TensorId,
        w_ih: TensorId,
        w_hh: TensorId,
        bias: TensorId,
        hidden: usize,
        cache: Arc<LstmCache>,
    },
    SliceCols {
        x: TensorId,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<TensorId>),
    MeanRows(TensorId),
    SumAll(TensorId),
    MeanAll(TensorId),
    /// Interior joint angles: for each (prev, mid, next) point-index triple,
    /// the angle at `mid` between the vectors to `prev` and `next`.
    AnglesAtJoints {
        x: TensorId,
        triples: Arc<Vec<[usize; 3]>>,
    },
}

/// Arena of tensors recorded in topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Tensor>,
}

// Clamp bound for the cosine entering acos; keeps the angle gradient finite
// at exactly straight or folded joints.
const ANGLE_COS_CLAMP: f64 = 1.0 - 1e-12;

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    // ── Node access ─────────────────────────────────────────────────────

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    pub fn node(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0]
    }

    /// Value of a single-element tensor.
    pub fn value(&self, id: TensorId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].numel(), 1);
        self.nodes[id.0].data[0]
    }

    // ── Leaves ──────────────────────────────────────────────────────────

    pub fn leaf(&mut self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<TensorId> {
        self.shared_leaf(Arc::new(data), shape, requires_grad)
    }

    /// Leaf over shared storage; parameter stores use this to avoid copying
    /// their weights into every graph.
    pub fn shared_leaf(
        &mut self,
        data: Arc<Vec<f64>>,
        shape: Vec<usize>,
        requires_grad: bool,
    ) -> Result<TensorId> {
        let expected = numel(&shape);
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(self.push(shape, data, requires_grad, requires_grad, Op::Leaf))
    }

    /// Constant leaf that never receives a gradient.
    pub fn constant(&mut self, data: Vec<f64>, shape: Vec<usize>) -> TensorId {
        self.leaf(data, shape, false).expect("constant shape/data mismatch")
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.constant(vec![v], vec![1])
    }

    fn push(
        &mut self,
        shape: Vec<usize>,
        data: Arc<Vec<f64>>,
        requires_grad: bool,
        needs_grad: bool,
        op: Op,
    ) -> TensorId {
        self.nodes.push(Tensor {
            shape,
            data,
            requires_grad,
            grad: None,
            op,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn push_result(&mut self, shape: Vec<usize>, data: Vec<f64>, inputs: &[TensorId], op: Op) -> TensorId {
        let needs = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.push(shape, Arc::new(data), false, needs, op)
    }

    fn check_same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.nodes[a.0].shape.clone(),
                right: self.nodes[b.0].shape.clone(),
            });
        }
        Ok(())
    }

    /// Rows/cols view of a rank-1 or rank-2 tensor: rank 1 is a single row.
    fn as_2d(&self, id: TensorId) -> (usize, usize) {
        let shape = &self.nodes[id.0].shape;
        match shape.len() {
            1 => (1, shape[0]),
            2 => (shape[0], shape[1]),
            _ => panic!("expected rank <= 2, got {shape:?}"),
        }
    }

    // ── Elementwise ─────────────────────────────────────────────────────

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("add", a, b)?;
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let shape = self.nodes[a.0].shape.clone();
        Ok(self.push_result(shape, data, &[a, b], Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("sub", a, b)?;
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x - y).collect();
        let shape = self.nodes[a.0].shape.clone();
        Ok(self.push_result(shape, data, &[a, b], Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("mul", a, b)?;
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let shape = self.nodes[a.0].shape.clone();
        Ok(self.push_result(shape, data, &[a, b], Op::Mul(a, b)))
    }

    /// a*x + b with scalar coefficients.
    pub fn affine(&mut self, x: TensorId, a: f64, b: f64) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|&v| a * v + b).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push_result(shape, data, &[x], Op::Affine { x, a, b })
    }

    pub fn scale(&mut self, x: TensorId, s: f64) -> TensorId {
        self.affine(x, s, 0.0)
    }

    /// Broadcast-add vector `v` (length n) to each row of `x` (m×n).
    pub fn add_row(&mut self, x: TensorId, v: TensorId) -> Result<TensorId> {
        let (rows, cols) = self.as_2d(x);
        if self.nodes[v.0].numel() != cols {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: self.nodes[x.0].shape.clone(),
                right: self.nodes[v.0].shape.clone(),
            });
        }
        let vd = self.data(v).to_vec();
        let mut data = self.data(x).to_vec();
        for r in 0..rows {
            for (o, &b) in data[r * cols..(r + 1) * cols].iter_mut().zip(&vd) {
                *o += b;
            }
        }
        let shape = self.nodes[x.0].shape.clone();
        Ok(self.push_result(shape, data, &[x, v], Op::AddRow { x, v }))
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|&v| v.max(0.0)).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push_result(shape, data, &[x], Op::Relu(x))
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|&v| v.tanh()).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push_result(shape, data, &[x], Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|&v| sigmoid(v)).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push_result(shape, data, &[x], Op::Sigmoid(x))
    }

    pub fn square(&mut self, x: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|&v| v * v).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push_result(shape, data, &[x], Op::Square(x))
    }

    pub fn ln(&mut self, x: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|&v| v.ln()).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push_result(shape, data, &[x], Op::Ln(x))
    }

    // ── Matrix products ─────────────────────────────────────────────────

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, ka) = self.as_2d(a);
        let (kb, n) = self.as_2d(b);
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.nodes[a.0].shape.clone(),
                right: self.nodes[b.0].shape.clone(),
            });
        }
        let mut data = vec![0.0; m * n];
        matmul_nn_acc(&mut data, self.data(a), self.data(b), m, ka, n);
        Ok(self.push_result(vec![m, n], data, &[a, b], Op::Matmul(a, b)))
    }

    /// a[m,k] · b[n,k]ᵀ → m×n.
    pub fn matmul_nt(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, ka) = self.as_2d(a);
        let (n, kb) = self.as_2d(b);
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_nt",
                left: self.nodes[a.0].shape.clone(),
                right: self.nodes[b.0].shape.clone(),
            });
        }
        let mut data = vec![0.0; m * n];
        matmul_nt_acc(&mut data, self.data(a), self.data(b), m, ka, n);
        Ok(self.push_result(vec![m, n], data, &[a, b], Op::MatmulNT(a, b)))
    }

    // ── Normalization and attention weights ─────────────────────────────

    /// Numerically stable softmax along `axis` (max-subtraction).
    pub fn softmax(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.nodes[x.0].shape.clone();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                axis,
                rank: shape.len(),
            });
        }
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let xd = self.data(x);
        let mut data = vec![0.0; xd.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                let mut max = f64::NEG_INFINITY;
                for j in 0..n {
                    max = max.max(xd[base + j * inner]);
                }
                let mut sum = 0.0;
                for j in 0..n {
                    let e = (xd[base + j * inner] - max).exp();
                    data[base + j * inner] = e;
                    sum += e;
                }
                for j in 0..n {
                    data[base + j * inner] /= sum;
                }
            }
        }
        Ok(self.push_result(shape, data, &[x], Op::Softmax { x, axis }))
    }

    /// Per-row layer normalization over the last dimension of a T×d (or 1-D)
    /// tensor, with learned gain/offset.
    pub fn layer_norm(&mut self, x: TensorId, gamma: TensorId, beta: TensorId, eps: f64) -> Result<TensorId> {
        let (rows, cols) = self.as_2d(x);
        if self.nodes[gamma.0].numel() != cols || self.nodes[beta.0].numel() != cols {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                left: self.nodes[x.0].shape.clone(),
                right: self.nodes[gamma.0].shape.clone(),
            });
        }
        if eps <= 0.0 {
            return Err(TensorError::Config(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let xd = self.data(x);
        let gd = self.data(gamma);
        let bd = self.data(beta);
        let mut data = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * cols..(r + 1) * cols];
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            for c in 0..cols {
                data[r * cols + c] = (row[c] - mean) * inv_std * gd[c] + bd[c];
            }
        }
        let shape = self.nodes[x.0].shape.clone();
        Ok(self.push_result(shape, data, &[x, gamma, beta], Op::LayerNorm { x, gamma, beta, eps }))
    }

    // ── Temporal layers ─────────────────────────────────────────────────

    /// 1-D convolution over time. `x` is T×c_in, `kernel` is w×c_in×c_out.
    /// Cross-correlation convention: no kernel flip.
    pub fn conv1d(&mut self, x: TensorId, kernel: TensorId, stride: usize, padding: Padding) -> Result<TensorId> {
        if stride < 1 {
            return Err(TensorError::Config("conv1d stride must be >= 1".into()));
        }
        let (t, c_in) = self.as_2d(x);
        let kshape = self.nodes[kernel.0].shape.clone();
        if kshape.len() != 3 || kshape[1] != c_in {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                left: self.nodes[x.0].shape.clone(),
                right: kshape,
            });
        }
        let (w, c_out) = (kshape[0], kshape[2]);
        let pad_left = match padding {
            Padding::Same => (w - 1) / 2,
            Padding::Valid => 0,
        };
        let pad_total = match padding {
            Padding::Same => w - 1,
            Padding::Valid => 0,
        };
        if t + pad_total < w {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d (kernel wider than padded input)",
                left: self.nodes[x.0].shape.clone(),
                right: self.nodes[kernel.0].shape.clone(),
            });
        }
        let t_out = (t + pad_total - w) / stride + 1;
        let xd = self.data(x);
        let kd = self.data(kernel);
        let mut data = vec![0.0; t_out * c_out];
        for ot in 0..t_out {
            let out_row = &mut data[ot * c_out..(ot + 1) * c_out];
            for dw in 0..w {
                let it = (ot * stride + dw) as isize - pad_left as isize;
                if it < 0 || it as usize >= t {
                    continue;
                }
                let x_row = &xd[it as usize * c_in..(it as usize + 1) * c_in];
                for (ci, &xv) in x_row.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let k_row = &kd[(dw * c_in + ci) * c_out..(dw * c_in + ci + 1) * c_out];
                    axpy(out_row, k_row, xv);
                }
            }
        }
        Ok(self.push_result(
            vec![t_out, c_out],
            data,
            &[x, kernel],
            Op::Conv1d {
                x,
                kernel,
                stride,
                pad_left,
            },
        ))
    }

    /// One LSTM layer over a T×d_in sequence; returns the full T×hidden
    /// sequence. Zero initial states, no peepholes. Weights are stored
    /// gate-major in i, f, g, o order: `w_ih` is 4h×d_in, `w_hh` is 4h×h,
    /// `bias` is 4h.
    pub fn lstm(&mut self, x: TensorId, w_ih: TensorId, w_hh: TensorId, bias: TensorId, hidden: usize) -> Result<TensorId> {
        let (t, d_in) = self.as_2d(x);
        let h = hidden;
        if self.nodes[w_ih.0].shape != [4 * h, d_in] {
            return Err(TensorError::ShapeMismatch {
                op: "lstm w_ih",
                left: self.nodes[w_ih.0].shape.clone(),
                right: vec![4 * h, d_in],
            });
        }
        if self.nodes[w_hh.0].shape != [4 * h, h] {
            return Err(TensorError::ShapeMismatch {
                op: "lstm w_hh",
                left: self.nodes[w_hh.0].shape.clone(),
                right: vec![4 * h, h],
            });
        }
        if self.nodes[bias.0].numel() != 4 * h {
            return Err(TensorError::ShapeMismatch {
                op: "lstm bias",
                left: self.nodes[bias.0].shape.clone(),
                right: vec![4 * h],
            });
        }
        let xd = self.data(x);
        let wi = self.data(w_ih);
        let wh = self.data(w_hh);
        let bd = self.data(bias);

        let mut cache = LstmCache {
            gate_i: vec![0.0; t * h],
            gate_f: vec![0.0; t * h],
            gate_g: vec![0.0; t * h],
            gate_o: vec![0.0; t * h],
            cell: vec![0.0; t * h],
            cell_tanh: vec![0.0; t * h],
        };
        let mut out = vec![0.0; t * h];
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut pre = vec![0.0; 4 * h];
        for step in 0..t {
            pre.copy_from_slice(bd);
            let x_row = &xd[step * d_in..(step + 1) * d_in];
            // pre += w_ih · x_row, pre += w_hh · h_prev
            matmul_nt_acc(&mut pre, wi, x_row, 4 * h, d_in, 1);
            matmul_nt_acc(&mut pre, wh, &h_prev, 4 * h, h, 1);
            let base = step * h;
            for j in 0..h {
                let i = sigmoid(pre[j]);
                let f = sigmoid(pre[h + j]);
                let g = pre[2 * h + j].tanh();
                let o = sigmoid(pre[3 * h + j]);
                let c = f * c_prev[j] + i * g;
                let ct = c.tanh();
                cache.gate_i[base + j] = i;
                cache.gate_f[base + j] = f;
                cache.gate_g[base + j] = g;
                cache.gate_o[base + j] = o;
                cache.cell[base + j] = c;
                cache.cell_tanh[base + j] = ct;
                out[base + j] = o * ct;
            }
            c_prev.copy_from_slice(&cache.cell[base..base + h]);
            h_prev.copy_from_slice(&out[base..base + h]);
        }
        Ok(self.push_result(
            vec![t, h],
            out,
            &[x, w_ih, w_hh, bias],
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                bias,
                hidden,
                cache: Arc::new(cache),
            },
        ))
    }

    // ── Shape surgery ───────────────────────────────────────────────────

    pub fn slice_cols(&mut self, x: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let (rows, cols) = self.as_2d(x);
        if start + len > cols {
            return Err(TensorError::Config(format!(
                "slice_cols {start}..{} out of range for {cols} columns",
                start + len
            )));
        }
        let xd = self.data(x);
        let mut data = vec![0.0; rows * len];
        for r in 0..rows {
            data[r * len..(r + 1) * len].copy_from_slice(&xd[r * cols + start..r * cols + start + len]);
        }
        Ok(self.push_result(vec![rows, len], data, &[x], Op::SliceCols { x, start, len }))
    }

    /// Concatenate 2-D tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let (rows, _) = self.as_2d(parts[0]);
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.as_2d(p);
            if r != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.nodes[parts[0].0].shape.clone(),
                    right: self.nodes[p.0].shape.clone(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let pd = self.data(p);
            for r in 0..rows {
                data[r * total + offset..r * total + offset + w].copy_from_slice(&pd[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        Ok(self.push_result(vec![rows, total], data, parts, Op::ConcatCols(parts.to_vec())))
    }

    // ── Reductions ──────────────────────────────────────────────────────

    /// Column means of an m×n tensor → length-n vector.
    pub fn mean_rows(&mut self, x: TensorId) -> TensorId {
        let (rows, cols) = self.as_2d(x);
        let xd = self.data(x);
        let mut data = vec![0.0; cols];
        for r in 0..rows {
            for (o, &v) in data.iter_mut().zip(&xd[r * cols..(r + 1) * cols]) {
                *o += v;
            }
        }
        for o in data.iter_mut() {
            *o /= rows as f64;
        }
        self.push_result(vec![cols], data, &[x], Op::MeanRows(x))
    }

    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let s = self.data(x).iter().sum::<f64>();
        self.push_result(vec![1], vec![s], &[x], Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: TensorId) -> TensorId {
        let n = self.nodes[x.0].numel();
        let s = self.data(x).iter().sum::<f64>() / n as f64;
        self.push_result(vec![1], vec![s], &[x], Op::MeanAll(x))
    }

    /// Mean squared error between two same-shape tensors → scalar.
    pub fn mse(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let d = self.sub(a, b)?;
        let sq = self.square(d);
        Ok(self.mean_all(sq))
    }

    /// Joint angles at interior points: `x` holds 3-D points (row-major
    /// n×3 or flat 3n); for each (prev, mid, next) triple the output is the
    /// angle in [0, π] between (prev − mid) and (next − mid).
    pub fn angles_at_joints(&mut self, x: TensorId, triples: Arc<Vec<[usize; 3]>>) -> Result<TensorId> {
        let n = self.nodes[x.0].numel();
        if n % 3 != 0 {
            return Err(TensorError::Config(format!(
                "angles_at_joints needs 3-D points, got {n} values"
            )));
        }
        let points = n / 3;
        let xd = self.data(x);
        let mut data = Vec::with_capacity(triples.len());
        for &[p, m, q] in triples.iter() {
            if p >= points || m >= points || q >= points {
                return Err(TensorError::Config(format!(
                    "angle triple ({p},{m},{q}) out of range for {points} points"
                )));
            }
            let u = point_diff(xd, p, m);
            let v = point_diff(xd, q, m);
            let nu = norm3(&u);
            let nv = norm3(&v);
            if nu == 0.0 || nv == 0.0 {
                return Err(TensorError::Config(format!(
                    "degenerate pose: coincident landmarks in triple ({p},{m},{q})"
                )));
            }
            let c = (dot3(&u, &v) / (nu * nv)).clamp(-ANGLE_COS_CLAMP, ANGLE_COS_CLAMP);
            data.push(c.acos());
        }
        let count = triples.len();
        Ok(self.push_result(vec![count], data, &[x], Op::AnglesAtJoints { x, triples }))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Populates `grad` on every
    /// `requires_grad` node reachable from `loss`. Extra `seeds` inject
    /// additional upstream gradient into specific nodes (used for loss terms
    /// that couple several graphs).
    pub fn backward_seeded(&mut self, loss: TensorId, seeds: &[(TensorId, Vec<f64>)]) -> Result<()> {
        if self.nodes[loss.0].numel() != 1 {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: self.nodes[loss.0].shape.clone(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for (id, seed) in seeds {
            if seed.len() != self.nodes[id.0].numel() {
                return Err(TensorError::DataLength {
                    shape: self.nodes[id.0].shape.clone(),
                    expected: self.nodes[id.0].numel(),
                    got: seed.len(),
                });
            }
            match &mut grads[id.0] {
                Some(g) => axpy(g, seed, 1.0),
                slot => *slot = Some(seed.clone()),
            }
        }
        let top = loss.0.max(seeds.iter().map(|(id, _)| id.0).max().unwrap_or(0));
        for id in (0..=top).rev() {
            if grads[id].is_none() || !self.nodes[id].needs_grad {
                continue;
            }
            let dy = grads[id].take().expect("grad present");
            self.accumulate_inputs(id, &dy, &mut grads);
            if self.nodes[id].requires_grad {
                self.nodes[id].grad = Some(dy);
            }
        }
        Ok(())
    }

    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        self.backward_seeded(loss, &[])
    }

    fn accumulate_inputs(&self, id: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        // Fetch-or-create the gradient buffer for an input node.
        macro_rules! grad_of {
            ($tid:expr) => {{
                let t: TensorId = $tid;
                grads[t.0].get_or_insert_with(|| vec![0.0; self.nodes[t.0].numel()])
            }};
        }
        macro_rules! wants {
            ($tid:expr) => {
                self.nodes[$tid.0].needs_grad
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if wants!(a) {
                    axpy(grad_of!(*a), dy, 1.0);
                }
                if wants!(b) {
                    axpy(grad_of!(*b), dy, 1.0);
                }
            }
            Op::Sub(a, b) => {
                if wants!(a) {
                    axpy(grad_of!(*a), dy, 1.0);
                }
                if wants!(b) {
                    axpy(grad_of!(*b), dy, -1.0);
                }
            }
            Op::Mul(a, b) => {
                if wants!(a) {
                    let bd = self.data(*b);
                    for ((g, &d), &bv) in grad_of!(*a).iter_mut().zip(dy).zip(bd) {
                        *g += d * bv;
                    }
                }
                if wants!(b) {
                    let ad = self.data(*a);
                    for ((g, &d), &av) in grad_of!(*b).iter_mut().zip(dy).zip(ad) {
                        *g += d * av;
                    }
                }
            }
            Op::Affine { x, a, .. } => {
                if wants!(x) {
                    axpy(grad_of!(*x), dy, *a);
                }
            }
            Op::AddRow { x, v } => {
                if wants!(x) {
                    axpy(grad_of!(*x), dy, 1.0);
                }
                if wants!(v) {
                    let cols = self.nodes[v.0].numel();
                    let g = grad_of!(*v);
                    for row in dy.chunks_exact(cols) {
                        axpy(g, row, 1.0);
                    }
                }
            }
            Op::Matmul(a, b) => {
                let (m, k) = self.as_2d(*a);
                let (_, n) = self.as_2d(*b);
                if wants!(a) {
                    matmul_nt_acc(grad_of!(*a), dy, self.data(*b), m, n, k);
                }
                if wants!(b) {
                    matmul_tn_acc(grad_of!(*b), self.data(*a), dy, m, k, n);
                }
            }
            Op::MatmulNT(a, b) => {
                let (m, k) = self.as_2d(*a);
                let (n, _) = self.as_2d(*b);
                if wants!(a) {
                    matmul_nn_acc(grad_of!(*a), dy, self.data(*b), m, n, k);
                }
                if wants!(b) {
                    matmul_tn_acc(grad_of!(*b), dy, self.data(*a), m, n, k);
                }
            }
            Op::Relu(x) => {
                if wants!(x) {
                    let xd = self.data(*x);
                    for ((g, &d), &xv) in grad_of!(*x).iter_mut().zip(dy).zip(xd) {
                        if xv > 0.0 {
                            *g += d;
                        }
                    }
                }
            }
            Op::Tanh(x) => {
                if wants!(x) {
                    let yd = &node.data;
                    for ((g, &d), &yv) in grad_of!(*x).iter_mut().zip(dy).zip(yd.iter()) {
                        *g += d * (1.0 - yv * yv);
                    }
                }
            }
            Op::Sigmoid(x) => {
                if wants!(x) {
                    let yd = &node.data;
                    for ((g, &d), &yv) in grad_of!(*x).iter_mut().zip(dy).zip(yd.iter()) {
                        *g += d * yv * (1.0 - yv);
                    }
                }
            }
            Op::Square(x) => {
                if wants!(x) {
                    let xd = self.data(*x);
                    for ((g, &d), &xv) in grad_of!(*x).iter_mut().zip(dy).zip(xd) {
                        *g += d * 2.0 * xv;
                    }
                }
            }
            Op::Ln(x) => {
                if wants!(x) {
                    let xd = self.data(*x);
                    for ((g, &d), &xv) in grad_of!(*x).iter_mut().zip(dy).zip(xd) {
                        *g += d / xv;
                    }
                }
            }
            Op::Softmax { x, axis } => {
                if wants!(x) {
                    let shape = &node.shape;
                    let n = shape[*axis];
                    let inner: usize = shape[*axis + 1..].iter().product();
                    let outer: usize = shape[..*axis].iter().product();
                    let yd = &node.data;
                    let g = grad_of!(*x);
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * n * inner + i;
                            let mut dot = 0.0;
                            for j in 0..n {
                                let idx = base + j * inner;
                                dot += dy[idx] * yd[idx];
                            }
                            for j in 0..n {
                                let idx = base + j * inner;
                                g[idx] += yd[idx] * (dy[idx] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let (rows, cols) = self.as_2d(*x);
                let xd = self.data(*x);
                let gd = self.data(*gamma);
                for r in 0..rows {
                    let row = &xd[r * cols..(r + 1) * cols];
                    let dy_row = &dy[r * cols..(r + 1) * cols];
                    let mean = row.iter().sum::<f64>() / cols as f64;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                    let inv_std = 1.0 / (var + eps).sqrt();
                    if wants!(gamma) || wants!(beta) {
                        for c in 0..cols {
                            let xhat = (row[c] - mean) * inv_std;
                            if wants!(gamma) {
                                grad_of!(*gamma)[c] += dy_row[c] * xhat;
                            }
                            if wants!(beta) {
                                grad_of!(*beta)[c] += dy_row[c];
                            }
                        }
                    }
                    if wants!(x) {
                        let mut sum_dg = 0.0;
                        let mut sum_dg_xhat = 0.0;
                        for c in 0..cols {
                            let xhat = (row[c] - mean) * inv_std;
                            let dg = dy_row[c] * gd[c];
                            sum_dg += dg;
                            sum_dg_xhat += dg * xhat;
                        }
                        let inv_n = 1.0 / cols as f64;
                        let gx = grad_of!(*x);
                        for c in 0..cols {
                            let xhat = (row[c] - mean) * inv_std;
                            let dg = dy_row[c] * gd[c];
                            gx[r * cols + c] += inv_std * (dg - inv_n * sum_dg - xhat * inv_n * sum_dg_xhat);
                        }
                    }
                }
            }
            Op::Conv1d {
                x,
                kernel,
                stride,
                pad_left,
            } => {
                let (t, c_in) = self.as_2d(*x);
                let kshape = &self.nodes[kernel.0].shape;
                let (w, c_out) = (kshape[0], kshape[2]);
                let t_out = node.shape[0];
                let xd = self.data(*x);
                let kd = self.data(*kernel);
                for ot in 0..t_out {
                    let dy_row = &dy[ot * c_out..(ot + 1) * c_out];
                    for dw in 0..w {
                        let it = (ot * stride + dw) as isize - *pad_left as isize;
                        if it < 0 || it as usize >= t {
                            continue;
                        }
                        let it = it as usize;
                        for ci in 0..c_in {
                            let k_row = &kd[(dw * c_in + ci) * c_out..(dw * c_in + ci + 1) * c_out];
                            if wants!(x) {
                                let mut s = 0.0;
                                for (&d, &kv) in dy_row.iter().zip(k_row) {
                                    s += d * kv;
                                }
                                grad_of!(*x)[it * c_in + ci] += s;
                            }
                            if wants!(kernel) {
                                let xv = xd[it * c_in + ci];
                                if xv != 0.0 {
                                    let gk = grad_of!(*kernel);
                                    axpy(
                                        &mut gk[(dw * c_in + ci) * c_out..(dw * c_in + ci + 1) * c_out],
                                        dy_row,
                                        xv,
                                    );
                                }
                            }
                        }
                    }
                }
            }
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                bias,
                hidden,
                cache,
            } => {
                self.lstm_backward(node, dy, *x, *w_ih, *w_hh, *bias, *hidden, cache, grads);
            }
            Op::SliceCols { x, start, len } => {
                if wants!(x) {
                    let (rows, cols) = self.as_2d(*x);
                    let g = grad_of!(*x);
                    for r in 0..rows {
                        axpy(
                            &mut g[r * cols + start..r * cols + start + len],
                            &dy[r * len..(r + 1) * len],
                            1.0,
                        );
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let rows = node.shape[0];
                let total = node.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = self.as_2d(p).1;
                    if wants!(p) {
                        let g = grad_of!(p);
                        for r in 0..rows {
                            axpy(
                                &mut g[r * w..(r + 1) * w],
                                &dy[r * total + offset..r * total + offset + w],
                                1.0,
                            );
                        }
                    }
                    offset += w;
                }
            }
            Op::MeanRows(x) => {
                if wants!(x) {
                    let (rows, cols) = self.as_2d(*x);
                    let inv = 1.0 / rows as f64;
                    let g = grad_of!(*x);
                    for r in 0..rows {
                        axpy(&mut g[r * cols..(r + 1) * cols], dy, inv);
                    }
                }
            }
            Op::SumAll(x) => {
                if wants!(x) {
                    let g = grad_of!(*x);
                    for gv in g.iter_mut() {
                        *gv += dy[0];
                    }
                }
            }
            Op::MeanAll(x) => {
                if wants!(x) {
                    let n = self.nodes[x.0].numel() as f64;
                    let g = grad_of!(*x);
                    for gv in g.iter_mut() {
                        *gv += dy[0] / n;
                    }
                }
            }
            Op::AnglesAtJoints { x, triples } => {
                if wants!(x) {
                    let xd = self.data(*x);
                    let g = grad_of!(*x);
                    for (ti, &[p, m, q]) in triples.iter().enumerate() {
                        let u = point_diff(xd, p, m);
                        let v = point_diff(xd, q, m);
                        let nu = norm3(&u);
                        let nv = norm3(&v);
                        let c_raw = dot3(&u, &v) / (nu * nv);
                        if c_raw.abs() >= ANGLE_COS_CLAMP {
                            // Angle clamped in forward; treat as locally flat.
                            continue;
                        }
                        let dtheta_dc = -1.0 / (1.0 - c_raw * c_raw).sqrt();
                        let scale = dy[ti] * dtheta_dc;
                        for ax in 0..3 {
                            // ∂c/∂u and ∂c/∂v
                            let dc_du = (v[ax] / nv - c_raw * u[ax] / nu) / nu;
                            let dc_dv = (u[ax] / nu - c_raw * v[ax] / nv) / nv;
                            g[p * 3 + ax] += scale * dc_du;
                            g[q * 3 + ax] += scale * dc_dv;
                            g[m * 3 + ax] -= scale * (dc_du + dc_dv);
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn lstm_backward(
        &self,
        node: &Tensor,
        dy: &[f64],
        x: TensorId,
        w_ih: TensorId,
        w_hh: TensorId,
        bias: TensorId,
        h: usize,
        cache: &LstmCache,
        grads: &mut [Option<Vec<f64>>],
    ) {
        let (t, d_in) = self.as_2d(x);
        let xd = self.data(x);
        let wi = self.data(w_ih);
        let wh = self.data(w_hh);
        let hd = &node.data; // hidden sequence, t×h

        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dgates = vec![0.0; 4 * h];

        let mut gx = if self.nodes[x.0].needs_grad {
            Some(vec![0.0; t * d_in])
        } else {
            None
        };
        let mut gwi = if self.nodes[w_ih.0].needs_grad {
            Some(vec![0.0; 4 * h * d_in])
        } else {
            None
        };
        let mut gwh = if self.nodes[w_hh.0].needs_grad {
            Some(vec![0.0; 4 * h * h])
        } else {
            None
        };
        let mut gb = if self.nodes[bias.0].needs_grad {
            Some(vec![0.0; 4 * h])
        } else {
            None
        };

        for step in (0..t).rev() {
            let base = step * h;
            for j in 0..h {
                let i = cache.gate_i[base + j];
                let f = cache.gate_f[base + j];
                let g = cache.gate_g[base + j];
                let o = cache.gate_o[base + j];
                let ct = cache.cell_tanh[base + j];
                let c_prev = if step == 0 { 0.0 } else { cache.cell[base - h + j] };

                let dh = dy[base + j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - ct * ct);

                dgates[j] = dc * g * i * (1.0 - i); // d pre_i
                dgates[h + j] = dc * c_prev * f * (1.0 - f); // d pre_f
                dgates[2 * h + j] = dc * i * (1.0 - g * g); // d pre_g
                dgates[3 * h + j] = dh * ct * o * (1.0 - o); // d pre_o
                dc_next[j] = dc * f;
            }
            let x_row = &xd[step * d_in..(step + 1) * d_in];
            if let Some(gwi) = gwi.as_mut() {
                // gwi[4h, d_in] += dgates ⊗ x_row
                for (j, &dg) in dgates.iter().enumerate() {
                    if dg != 0.0 {
                        axpy(&mut gwi[j * d_in..(j + 1) * d_in], x_row, dg);
                    }
                }
            }
            if step > 0 {
                let h_prev = &hd[(step - 1) * h..step * h];
                if let Some(gwh) = gwh.as_mut() {
                    for (j, &dg) in dgates.iter().enumerate() {
                        if dg != 0.0 {
                            axpy(&mut gwh[j * h..(j + 1) * h], h_prev, dg);
                        }
                    }
                }
            }
            if let Some(gb) = gb.as_mut() {
                axpy(gb, &dgates, 1.0);
            }
            if let Some(gx) = gx.as_mut() {
                // dx_row += w_ihᵀ · dgates
                let row = &mut gx[step * d_in..(step + 1) * d_in];
                matmul_tn_acc(row, wi, &dgates, 4 * h, d_in, 1);
            }
            // dh_prev = w_hhᵀ · dgates
            dh_next.fill(0.0);
            matmul_tn_acc(&mut dh_next, wh, &dgates, 4 * h, h, 1);
        }

        // Merge the local buffers into the shared gradient slots.
        let mut merge = |tid: TensorId, local: Option<Vec<f64>>| {
            if let Some(local) = local {
                match &mut grads[tid.0] {
                    Some(g) => axpy(g, &local, 1.0),
                    slot => *slot = Some(local),
                }
            }
        };
        merge(x, gx);
        merge(w_ih, gwi);
        merge(w_hh, gwh);
        merge(bias, gb);
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[inline]
fn point_diff(xd: &[f64], a: usize, b: usize) -> [f64; 3] {
    [
        xd[a * 3] - xd[b * 3],
        xd[a * 3 + 1] - xd[b * 3 + 1],
        xd[a * 3 + 2] - xd[b * 3 + 2],
    ]
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
