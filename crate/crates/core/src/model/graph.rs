//! A small reverse-mode tape over [`Matrix`] values.
//!
//! Every forward operation appends a node; [`Graph::backward`] walks the tape
//! in reverse and accumulates adjoints. Parameter leaves borrow their values
//! from a [`ParamStore`] so building a graph never copies weights.

use super::params::ParamStore;
use super::tensor::{log_sum_exp, softmax_into, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op {
    Param(usize),
    Const,
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Gelu(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        normed: Matrix,
        inv_std: Vec<f64>,
    },
    Softmax(NodeId),
    Gather {
        table: NodeId,
        ids: Vec<usize>,
    },
    SliceCols {
        x: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    /// Summed negative log-likelihood of `targets` under row-wise softmax of the logits.
    NllSum {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Matrix,
    },
}

struct Node {
    value: Option<Matrix>,
    op: Op,
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (Op::Param(p), _) => self.store.tensor(*p),
            (_, Some(v)) => v,
            (_, None) => unreachable!("non-parameter node without value"),
        }
    }

    /// Leaf for parameter `index`; repeated calls return the same node.
    pub fn param(&mut self, index: usize) -> NodeId {
        if let Some(id) = self.param_nodes[index] {
            return id;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(index),
        });
        let id = NodeId(self.nodes.len() - 1);
        self.param_nodes[index] = Some(id);
        id
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Const)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 × cols` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        let b = self.value(bias);
        assert_eq!(b.rows, 1);
        assert_eq!(b.cols, v.cols);
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&b.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).scaled(s);
        self.push(v, Op::Scale(a, s))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let data = x
            .data
            .iter()
            .map(|&v| 0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh()))
            .collect();
        let v = Matrix::from_vec(x.rows, x.cols, data);
        self.push(v, Op::Gelu(a))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> NodeId {
        let xv = self.value(x);
        let g = self.value(gain);
        let b = self.value(bias);
        let n = xv.cols as f64;
        let mut normed = Matrix::zeros(xv.rows, xv.cols);
        let mut out = Matrix::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for c in 0..xv.cols {
                let h = (row[c] - mean) * is;
                normed.set(r, c, h);
                out.set(r, c, h * g.data[c] + b.data[c]);
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
        )
    }

    /// Row-wise softmax; `-inf` entries act as a mask.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut out = Matrix::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            softmax_into(x.row(r), out.row_mut(r));
        }
        self.push(out, Op::Softmax(a))
    }

    /// Sets every entry above the diagonal to `-inf` (non-differentiable mask on a fresh node).
    pub fn causal_mask(&mut self, a: NodeId) -> NodeId {
        // Masked entries receive no gradient, so the mask is folded into an Add with a constant.
        let (rows, cols) = self.value(a).shape();
        let mut mask = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in (r + 1)..cols {
                mask.set(r, c, f64::NEG_INFINITY);
            }
        }
        let m = self.constant(mask);
        self.add(a, m)
    }

    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = self.value(table);
        let mut out = Matrix::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let xv = self.value(x);
        let mut out = Matrix::zeros(xv.rows, len);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            let pv = self.value(*p);
            for r in 0..rows {
                out.row_mut(r)[offset..offset + pv.cols].copy_from_slice(pv.row(r));
            }
            offset += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// `Σ_r −log softmax(logits_r)[targets_r]` as a `1 × 1` node.
    pub fn nll_sum(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let lv = self.value(logits);
        assert_eq!(lv.rows, targets.len());
        let mut probs = Matrix::zeros(lv.rows, lv.cols);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            total += log_sum_exp(row) - row[t];
            softmax_into(row, probs.row_mut(r));
        }
        self.push(
            Matrix::from_vec(1, 1, vec![total]),
            Op::NllSum {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Runs reverse accumulation from `root` (seeded with `seed`) and returns
    /// parameter gradients indexed like the store; unused parameters stay `None`.
    pub fn backward(&self, root: NodeId, seed: f64) -> Vec<Option<Matrix>> {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let (rows, cols) = self.value(root).shape();
        grads[root.0] = Some(Matrix::filled(rows, cols, seed));

        fn acc(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        let mut param_grads: Vec<Option<Matrix>> = vec![None; self.store.len()];
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Param(p) => param_grads[*p] = Some(g),
                Op::Const => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (s, v) in gb.data.iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                    acc(&mut grads, *bias, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.scaled(*s)),
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let data = x
                        .data
                        .iter()
                        .zip(&g.data)
                        .map(|(&v, &gv)| {
                            let u = GELU_C * (v + GELU_A * v * v * v);
                            let t = u.tanh();
                            let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                            gv * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
                        })
                        .collect();
                    acc(&mut grads, *a, Matrix::from_vec(x.rows, x.cols, data));
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normed,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let n = normed.cols as f64;
                    let mut gx = Matrix::zeros(normed.rows, normed.cols);
                    let mut gg = Matrix::zeros(1, normed.cols);
                    let mut gbias = Matrix::zeros(1, normed.cols);
                    for r in 0..normed.rows {
                        let dy = g.row(r);
                        let h = normed.row(r);
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for c in 0..normed.cols {
                            let dh = dy[c] * gv.data[c];
                            sum_dh += dh;
                            sum_dh_h += dh * h[c];
                            gg.data[c] += dy[c] * h[c];
                            gbias.data[c] += dy[c];
                        }
                        let is = inv_std[r];
                        let out = gx.row_mut(r);
                        for c in 0..normed.cols {
                            let dh = dy[c] * gv.data[c];
                            out[c] = is / n * (n * dh - sum_dh - h[c] * sum_dh_h);
                        }
                    }
                    acc(&mut grads, *gain, gg);
                    acc(&mut grads, *bias, gbias);
                    acc(&mut grads, *x, gx);
                }
                Op::Softmax(a) => {
                    let y = self.nodes[idx].value.as_ref().expect("softmax value");
                    let mut gx = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (o, (yy, gg)) in gx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yy * (gg - dot);
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::Gather { table, ids } => {
                    let t = self.value(*table);
                    let mut gt = Matrix::zeros(t.rows, t.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, v) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::SliceCols { x, start } => {
                    let xv = self.value(*x);
                    let mut gx = Matrix::zeros(xv.rows, xv.cols);
                    for r in 0..g.rows {
                        gx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).cols;
                        let mut gp = Matrix::zeros(g.rows, w);
                        for r in 0..g.rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        offset += w;
                        acc(&mut grads, *p, gp);
                    }
                }
                Op::NllSum {
                    logits,
                    targets,
                    probs,
                } => {
                    let s = g.data[0];
                    let mut gl = probs.scaled(s);
                    for (r, &t) in targets.iter().enumerate() {
                        gl.data[r * gl.cols + t] -= s;
                    }
                    acc(&mut grads, *logits, gl);
                }
            }
        }
        param_grads
    }
}
