//! Reverse-mode tape over the dense kernels.
//!
//! Forward calls append nodes; [`Tape::backward`] walks the list in reverse
//! and accumulates exact cotangents. Parameters are bound by name so the
//! resulting gradients can be flushed into a [`ParamStore`].

use super::dense;
use super::matrix::Matrix;
use super::store::ParamStore;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    /// Leaf: constant or differentiable input.
    Input,
    /// Leaf bound to a named store parameter.
    Param(String),
    MatMul(Var, Var),
    Add(Var, Var),
    /// m×n plus a 1×n row broadcast over rows.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// x + s·C for a constant matrix C and a 1×1 variable s.
    AddScaledConst(Var, Matrix, Var),
    Relu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    MeanRows(Var),
    MeanAll(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    SelectRow(Var, usize),
    Transpose(Var),
    /// Rows x_i ⊙ x_j for all pairs i<j, in row-major pair order.
    PairwiseMul(Var),
    /// Rows x_i + x_j for all pairs i<j.
    PairwiseAdd(Var),
    /// Elementwise binary cross-entropy of probabilities against constant
    /// targets, with probabilities clamped to [eps, 1-eps].
    Bce(Var, Matrix, f64),
}

struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root w.r.t. `v` (zeros if unused).
    pub fn grad(&self, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let val = &self.nodes[v.0].value;
                Matrix::zeros(val.rows(), val.cols())
            }
        }
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(Op::Input, m)
    }

    /// Bind a named parameter; its current value is copied onto the tape.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Var {
        let value = store.value(name).clone();
        self.push(Op::Param(name.to_string()), value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).add(self.value(b));
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// Broadcast-add a 1×n row to every row of an m×n matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (m, n) = self.value(a).shape();
        assert_eq!(self.value(row).shape(), (1, n), "add_row shape mismatch");
        let v = Matrix::from_fn(m, n, |i, j| self.value(a)[(i, j)] + self.value(row)[(0, j)]);
        self.push(Op::AddRow(a, row), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        self.push(Op::Scale(a, c), v)
    }

    /// x + s·C where C is constant and s is a 1×1 variable.
    pub fn add_scaled_const(&mut self, x: Var, c: Matrix, s: Var) -> Var {
        assert_eq!(self.value(s).shape(), (1, 1));
        assert_eq!(self.value(x).shape(), c.shape());
        let sv = self.value(s)[(0, 0)];
        let mut v = self.value(x).clone();
        v.add_assign_scaled(&c, sv);
        self.push(Op::AddScaledConst(x, c, s), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = dense::relu_forward(self.value(a));
        self.push(Op::Relu(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = dense::sigmoid_forward(self.value(a));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = dense::softmax_rows_forward(self.value(a));
        self.push(Op::SoftmaxRows(a), v)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = dense::mean_rows_forward(self.value(a));
        self.push(Op::MeanRows(a), v)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let val = self.value(a);
        let v = Matrix::filled(1, 1, val.sum() / val.len() as f64);
        self.push(Op::MeanAll(a), v)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = dense::concat_cols_forward(self.value(a), self.value(b));
        self.push(Op::ConcatCols(a, b), v)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let src = self.value(a);
        assert!(start + len <= src.cols(), "slice_cols out of range");
        let v = Matrix::from_fn(src.rows(), len, |i, j| src[(i, j + start)]);
        self.push(Op::SliceCols(a, start), v)
    }

    pub fn select_row(&mut self, a: Var, row: usize) -> Var {
        let src = self.value(a);
        let v = Matrix::row_vec(src.row(row));
        self.push(Op::SelectRow(a, row), v)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn pairwise_mul(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let m = src.rows();
        let pairs = m * (m - 1) / 2;
        let mut v = Matrix::zeros(pairs, src.cols());
        let mut k = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                for c in 0..src.cols() {
                    v[(k, c)] = src[(i, c)] * src[(j, c)];
                }
                k += 1;
            }
        }
        self.push(Op::PairwiseMul(a), v)
    }

    pub fn pairwise_add(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let m = src.rows();
        let pairs = m * (m - 1) / 2;
        let mut v = Matrix::zeros(pairs, src.cols());
        let mut k = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                for c in 0..src.cols() {
                    v[(k, c)] = src[(i, c)] + src[(j, c)];
                }
                k += 1;
            }
        }
        self.push(Op::PairwiseAdd(a), v)
    }

    /// Elementwise BCE of probabilities `p` against constant targets `y`,
    /// with p clamped to [eps, 1−eps]: −y·ln p − (1−y)·ln(1−p).
    pub fn bce(&mut self, p: Var, targets: Matrix, eps: f64) -> Var {
        assert_eq!(self.value(p).shape(), targets.shape(), "bce shape mismatch");
        let v = self.value(p).zip_map(&targets, |pi, yi| {
            let pc = pi.clamp(eps, 1.0 - eps);
            -yi * pc.ln() - (1.0 - yi) * (1.0 - pc).ln()
        });
        self.push(Op::Bce(p, targets, eps), v)
    }

    /// Reverse pass from a 1×1 root, seeding its cotangent with `seed`.
    ///
    /// Gradients accumulate across calls until `clear_grads`; params bound
    /// multiple times accumulate correctly within one pass.
    pub fn backward(&mut self, root: Var, seed: f64) {
        assert_eq!(self.value(root).shape(), (1, 1), "backward root must be scalar");
        let n = self.nodes.len();
        let mut grads: Vec<Option<Matrix>> = vec![None; n];
        grads[root.0] = Some(Matrix::filled(1, 1, seed));

        for idx in (0..n).rev() {
            let dout = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            // re-store so callers can read grads of interior nodes too
            grads[idx] = Some(dout.clone());
            let add = |grads: &mut Vec<Option<Matrix>>, v: Var, g: Matrix| {
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            };
            match &self.nodes[idx].op {
                Op::Input | Op::Param(_) => {}
                Op::MatMul(a, b) => {
                    let (da, db) =
                        dense::vjp_matmul(&self.nodes[a.0].value, &self.nodes[b.0].value, &dout);
                    add(&mut grads, *a, da);
                    add(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    add(&mut grads, *a, dout.clone());
                    add(&mut grads, *b, dout);
                }
                Op::AddRow(a, row) => {
                    let mut drow = Matrix::zeros(1, dout.cols());
                    for i in 0..dout.rows() {
                        for j in 0..dout.cols() {
                            drow[(0, j)] += dout[(i, j)];
                        }
                    }
                    add(&mut grads, *a, dout);
                    add(&mut grads, *row, drow);
                }
                Op::Mul(a, b) => {
                    let (da, db) =
                        dense::vjp_mul(&self.nodes[a.0].value, &self.nodes[b.0].value, &dout);
                    add(&mut grads, *a, da);
                    add(&mut grads, *b, db);
                }
                Op::Scale(a, c) => add(&mut grads, *a, dout.scale(*c)),
                Op::AddScaledConst(x, c, s) => {
                    let ds = dout.zip_map(c, |d, ci| d * ci).sum();
                    add(&mut grads, *x, dout);
                    add(&mut grads, *s, Matrix::filled(1, 1, ds));
                }
                Op::Relu(a) => {
                    let da = dense::vjp_relu(&self.nodes[a.0].value, &dout);
                    add(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let da = dense::vjp_sigmoid(&self.nodes[idx].value, &dout);
                    add(&mut grads, *a, da);
                }
                Op::SoftmaxRows(a) => {
                    let da = dense::vjp_softmax_rows(&self.nodes[idx].value, &dout);
                    add(&mut grads, *a, da);
                }
                Op::MeanRows(a) => {
                    let da = dense::vjp_mean_rows(self.nodes[a.0].value.rows(), &dout);
                    add(&mut grads, *a, da);
                }
                Op::MeanAll(a) => {
                    let src = &self.nodes[a.0].value;
                    let c = dout[(0, 0)] / src.len() as f64;
                    add(&mut grads, *a, Matrix::filled(src.rows(), src.cols(), c));
                }
                Op::ConcatCols(a, b) => {
                    let (da, db) = dense::vjp_concat_cols(self.nodes[a.0].value.cols(), &dout);
                    add(&mut grads, *a, da);
                    add(&mut grads, *b, db);
                }
                Op::SliceCols(a, start) => {
                    let src = &self.nodes[a.0].value;
                    let mut da = Matrix::zeros(src.rows(), src.cols());
                    for i in 0..dout.rows() {
                        for j in 0..dout.cols() {
                            da[(i, j + start)] = dout[(i, j)];
                        }
                    }
                    add(&mut grads, *a, da);
                }
                Op::SelectRow(a, row) => {
                    let src = &self.nodes[a.0].value;
                    let mut da = Matrix::zeros(src.rows(), src.cols());
                    for j in 0..dout.cols() {
                        da[(*row, j)] = dout[(0, j)];
                    }
                    add(&mut grads, *a, da);
                }
                Op::Transpose(a) => add(&mut grads, *a, dout.transpose()),
                Op::PairwiseMul(a) => {
                    let src = &self.nodes[a.0].value;
                    let m = src.rows();
                    let mut da = Matrix::zeros(m, src.cols());
                    let mut k = 0;
                    for i in 0..m {
                        for j in (i + 1)..m {
                            for c in 0..src.cols() {
                                da[(i, c)] += dout[(k, c)] * src[(j, c)];
                                da[(j, c)] += dout[(k, c)] * src[(i, c)];
                            }
                            k += 1;
                        }
                    }
                    add(&mut grads, *a, da);
                }
                Op::PairwiseAdd(a) => {
                    let src = &self.nodes[a.0].value;
                    let m = src.rows();
                    let mut da = Matrix::zeros(m, src.cols());
                    let mut k = 0;
                    for i in 0..m {
                        for j in (i + 1)..m {
                            for c in 0..src.cols() {
                                da[(i, c)] += dout[(k, c)];
                                da[(j, c)] += dout[(k, c)];
                            }
                            k += 1;
                        }
                    }
                    add(&mut grads, *a, da);
                }
                Op::Bce(p, targets, eps) => {
                    let pv = &self.nodes[p.0].value;
                    let dp = Matrix::from_fn(pv.rows(), pv.cols(), |i, j| {
                        let pi = pv[(i, j)];
                        if pi <= *eps || pi >= 1.0 - *eps {
                            0.0 // clamped region: constant loss
                        } else {
                            let yi = targets[(i, j)];
                            dout[(i, j)] * (pi - yi) / (pi * (1.0 - pi))
                        }
                    });
                    add(&mut grads, *p, dp);
                }
            }
        }

        for (slot, g) in self.grads.iter_mut().zip(grads) {
            if let Some(g) = g {
                match slot {
                    Some(acc) => acc.add_assign(&g),
                    none => *none = Some(g),
                }
            }
        }
    }

    /// Add accumulated parameter gradients into the store.
    pub fn flush_param_grads(&self, store: &mut ParamStore) {
        for (node, grad) in self.nodes.iter().zip(&self.grads) {
            if let (Op::Param(name), Some(g)) = (&node.op, grad) {
                store.add_to_grad(name, g);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::{sample_gaussian_matrix, StreamRng};
    use crate::numeric::store::ParamStore;

    /// FD oracle over an arbitrary tape-built scalar function of the store.
    fn fd_vs_tape(
        store: &ParamStore,
        build: impl Fn(&mut Tape, &ParamStore) -> Var,
        tol: f64,
    ) {
        let mut tape = Tape::new();
        let root = build(&mut tape, store);
        tape.backward(root, 1.0);
        let mut grads = ParamStore::new();
        for name in store.names() {
            grads.insert(name, store.value(name).clone());
        }
        grads.zero_grads();
        tape.flush_param_grads(&mut grads);

        let h = 1e-5;
        for name in store.names() {
            for idx in 0..store.value(name).len() {
                let mut plus = store.clone();
                plus.value_mut(name).data_mut()[idx] += h;
                let mut minus = store.clone();
                minus.value_mut(name).data_mut()[idx] -= h;
                let mut tp = Tape::new();
                let rp = build(&mut tp, &plus);
                let mut tm = Tape::new();
                let rm = build(&mut tm, &minus);
                let fd = (tp.value(rp).scalar() - tm.value(rm).scalar()) / (2.0 * h);
                let got = grads.grad(name).data()[idx];
                let denom = fd.abs().max(got.abs()).max(1e-3);
                assert!(
                    ((fd - got) / denom).abs() < tol,
                    "param {name}[{idx}]: fd={fd} got={got}"
                );
            }
        }
    }

    #[test]
    fn composite_network_gradient_matches_fd() {
        let root = StreamRng::new(31);
        let mut store = ParamStore::new();
        store.insert("w1", sample_gaussian_matrix(&mut root.stream("w1", 0), 3, 4, 0.0, 0.7));
        store.insert("b1", sample_gaussian_matrix(&mut root.stream("b1", 0), 1, 4, 0.0, 0.2));
        store.insert("w2", sample_gaussian_matrix(&mut root.stream("w2", 0), 4, 1, 0.0, 0.7));
        let x = sample_gaussian_matrix(&mut root.stream("x", 0), 5, 3, 0.0, 1.0);
        let y = Matrix::from_fn(5, 1, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 });

        fd_vs_tape(
            &store,
            move |tape, store| {
                let xin = tape.input(x.clone());
                let w1 = tape.param(store, "w1");
                let b1 = tape.param(store, "b1");
                let w2 = tape.param(store, "w2");
                let h1 = tape.matmul(xin, w1);
                let h1 = tape.add_row(h1, b1);
                let h1 = tape.sigmoid(h1); // smooth everywhere
                let out = tape.matmul(h1, w2);
                let p = tape.sigmoid(out);
                let l = tape.bce(p, y.clone(), 1e-7);
                tape.mean_all(l)
            },
            1e-6,
        );
    }

    #[test]
    fn attentionish_ops_gradient_matches_fd() {
        let root = StreamRng::new(37);
        let mut store = ParamStore::new();
        store.insert("wq", sample_gaussian_matrix(&mut root.stream("wq", 0), 4, 4, 0.0, 0.5));
        store.insert("wk", sample_gaussian_matrix(&mut root.stream("wk", 0), 4, 4, 0.0, 0.5));
        store.insert("edge_bias", Matrix::filled(1, 1, 0.3));
        let x = sample_gaussian_matrix(&mut root.stream("x", 0), 5, 4, 0.0, 1.0);
        let adj = Matrix::from_fn(5, 5, |i, j| if (i + j) % 3 == 0 && i != j { 1.0 } else { 0.0 });
        let adj = adj.zip_map(&adj.transpose(), |a, b| a.max(b));

        fd_vs_tape(
            &store,
            move |tape, store| {
                let xin = tape.input(x.clone());
                let wq = tape.param(store, "wq");
                let wk = tape.param(store, "wk");
                let s = tape.param(store, "edge_bias");
                let q = tape.matmul(xin, wq);
                let k = tape.matmul(xin, wk);
                let kt = tape.transpose(k);
                let logits = tape.matmul(q, kt);
                let logits = tape.scale(logits, 0.5);
                let logits = tape.add_scaled_const(logits, adj.clone(), s);
                let attn = tape.softmax_rows(logits);
                let mixed = tape.matmul(attn, xin);
                let pm = tape.pairwise_mul(mixed);
                let pa = tape.pairwise_add(mixed);
                let cat = tape.concat_cols(pm, pa);
                let m = tape.mean_rows(cat);
                let m2 = tape.mul(m, m);
                let s2 = tape.mean_all(m2);
                tape.scale(s2, 3.0)
            },
            1e-5,
        );
    }

    #[test]
    fn slice_select_ops_gradient_matches_fd() {
        let root = StreamRng::new(41);
        let mut store = ParamStore::new();
        store.insert("w", sample_gaussian_matrix(&mut root.stream("w", 0), 3, 6, 0.0, 0.8));
        fd_vs_tape(
            &store,
            |tape, store| {
                let w = tape.param(store, "w");
                let left = tape.slice_cols(w, 0, 3);
                let right = tape.slice_cols(w, 3, 3);
                let prod = tape.mul(left, right);
                let r0 = tape.select_row(prod, 1);
                let sm = tape.softmax_rows(r0);
                let m = tape.mean_all(sm);
                // make it depend on softmax input nontrivially
                let m2 = tape.mul(m, m);
                let all = tape.mean_all(prod);
                let s = tape.add(m2, all);
                tape.mean_all(s)
            },
            1e-5,
        );
    }

    #[test]
    fn param_bound_twice_accumulates() {
        let mut store = ParamStore::new();
        store.insert("w", Matrix::filled(1, 1, 3.0));
        let mut tape = Tape::new();
        let a = tape.param(&store, "w");
        let b = tape.param(&store, "w");
        let prod = tape.mul(a, b); // w² → d/dw = 2w = 6
        let l = tape.mean_all(prod);
        tape.backward(l, 1.0);
        tape.flush_param_grads(&mut store);
        assert!((store.grad("w")[(0, 0)] - 6.0).abs() < 1e-12);
    }
}
