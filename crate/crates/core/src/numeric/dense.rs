//! Differentiable dense kernels.
//!
//! Each kind has a forward map and an exact pullback (vector-Jacobian
//! product). The reverse-mode tape dispatches to the same `vjp_*` functions,
//! so a single implementation backs both surfaces.

use super::matrix::Matrix;

/// The dense map kinds exposed through [`dense_forward_backward`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseKind {
    /// `y = x·W + b` (b broadcast over rows; inputs = [x], params = (W, b)).
    Linear,
    Relu,
    Sigmoid,
    SoftmaxRows,
    /// Column means: m×n → 1×n.
    MeanRows,
    Add,
    ElementwiseMul,
    ConcatCols,
}

// ---------------------------------------------------------------------------
// forward kernels
// ---------------------------------------------------------------------------

pub(crate) fn linear_forward(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(b.rows(), 1, "bias must be a row vector");
    assert_eq!(b.cols(), w.cols(), "bias width mismatch");
    let mut y = x.matmul(w);
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            y[(i, j)] += b[(0, j)];
        }
    }
    y
}

pub(crate) fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

pub(crate) fn sigmoid_forward(x: &Matrix) -> Matrix {
    x.map(sigmoid)
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_rows_forward(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let row = x.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..x.cols() {
            let e = (row[j] - max).exp();
            out[(i, j)] = e;
            sum += e;
        }
        for j in 0..x.cols() {
            out[(i, j)] /= sum;
        }
    }
    out
}

pub(crate) fn mean_rows_forward(x: &Matrix) -> Matrix {
    x.col_means()
}

pub(crate) fn concat_cols_forward(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows(), b.rows(), "concat_cols row mismatch");
    Matrix::from_fn(a.rows(), a.cols() + b.cols(), |i, j| {
        if j < a.cols() {
            a[(i, j)]
        } else {
            b[(i, j - a.cols())]
        }
    })
}

// ---------------------------------------------------------------------------
// pullbacks
// ---------------------------------------------------------------------------

/// d(x·W + b) → (dx, dW, db)
pub(crate) fn vjp_linear(x: &Matrix, w: &Matrix, dout: &Matrix) -> (Matrix, Matrix, Matrix) {
    let dx = dout.matmul(&w.transpose());
    let dw = x.transpose().matmul(dout);
    let mut db = Matrix::zeros(1, dout.cols());
    for i in 0..dout.rows() {
        for j in 0..dout.cols() {
            db[(0, j)] += dout[(i, j)];
        }
    }
    (dx, dw, db)
}

pub(crate) fn vjp_relu(x: &Matrix, dout: &Matrix) -> Matrix {
    x.zip_map(dout, |xi, d| if xi > 0.0 { d } else { 0.0 })
}

/// Takes the forward output `y = sigmoid(x)`.
pub(crate) fn vjp_sigmoid(y: &Matrix, dout: &Matrix) -> Matrix {
    y.zip_map(dout, |yi, d| d * yi * (1.0 - yi))
}

/// Takes the forward output `y = softmax_rows(x)`:
/// dx = y ⊙ (dout − rowsum(dout ⊙ y)).
pub(crate) fn vjp_softmax_rows(y: &Matrix, dout: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for i in 0..y.rows() {
        let dot: f64 = (0..y.cols()).map(|j| dout[(i, j)] * y[(i, j)]).sum();
        for j in 0..y.cols() {
            dx[(i, j)] = y[(i, j)] * (dout[(i, j)] - dot);
        }
    }
    dx
}

pub(crate) fn vjp_mean_rows(input_rows: usize, dout: &Matrix) -> Matrix {
    let inv = 1.0 / input_rows as f64;
    Matrix::from_fn(input_rows, dout.cols(), |_, j| dout[(0, j)] * inv)
}

pub(crate) fn vjp_mul(a: &Matrix, b: &Matrix, dout: &Matrix) -> (Matrix, Matrix) {
    (b.zip_map(dout, |bi, d| bi * d), a.zip_map(dout, |ai, d| ai * d))
}

pub(crate) fn vjp_concat_cols(a_cols: usize, dout: &Matrix) -> (Matrix, Matrix) {
    let da = Matrix::from_fn(dout.rows(), a_cols, |i, j| dout[(i, j)]);
    let db = Matrix::from_fn(dout.rows(), dout.cols() - a_cols, |i, j| dout[(i, j + a_cols)]);
    (da, db)
}

pub(crate) fn vjp_matmul(a: &Matrix, b: &Matrix, dout: &Matrix) -> (Matrix, Matrix) {
    (dout.matmul(&b.transpose()), a.transpose().matmul(dout))
}

// ---------------------------------------------------------------------------
// op-level surface: (output, pullback)
// ---------------------------------------------------------------------------

/// Cotangents produced by a [`DensePullback`].
#[derive(Debug)]
pub struct DenseGrads {
    pub inputs: Vec<Matrix>,
    /// Present only for `Linear`: (dW, db).
    pub params: Option<(Matrix, Matrix)>,
}

/// Captured state mapping an output cotangent to input/parameter cotangents.
pub struct DensePullback {
    kind: DenseKind,
    saved: Vec<Matrix>,
    input_rows: usize,
    a_cols: usize,
}

impl DensePullback {
    pub fn call(&self, dout: &Matrix) -> DenseGrads {
        match self.kind {
            DenseKind::Linear => {
                let (dx, dw, db) = vjp_linear(&self.saved[0], &self.saved[1], dout);
                DenseGrads { inputs: vec![dx], params: Some((dw, db)) }
            }
            DenseKind::Relu => DenseGrads {
                inputs: vec![vjp_relu(&self.saved[0], dout)],
                params: None,
            },
            DenseKind::Sigmoid => DenseGrads {
                inputs: vec![vjp_sigmoid(&self.saved[0], dout)],
                params: None,
            },
            DenseKind::SoftmaxRows => DenseGrads {
                inputs: vec![vjp_softmax_rows(&self.saved[0], dout)],
                params: None,
            },
            DenseKind::MeanRows => DenseGrads {
                inputs: vec![vjp_mean_rows(self.input_rows, dout)],
                params: None,
            },
            DenseKind::Add => DenseGrads {
                inputs: vec![dout.clone(), dout.clone()],
                params: None,
            },
            DenseKind::ElementwiseMul => {
                let (da, db) = vjp_mul(&self.saved[0], &self.saved[1], dout);
                DenseGrads { inputs: vec![da, db], params: None }
            }
            DenseKind::ConcatCols => {
                let (da, db) = vjp_concat_cols(self.a_cols, dout);
                DenseGrads { inputs: vec![da, db], params: None }
            }
        }
    }
}

/// Run one dense map and return its output together with the exact pullback.
///
/// `params` is required for `Linear` (weights, bias) and ignored otherwise.
pub fn dense_forward_backward(
    kind: DenseKind,
    inputs: &[&Matrix],
    params: Option<(&Matrix, &Matrix)>,
) -> (Matrix, DensePullback) {
    match kind {
        DenseKind::Linear => {
            let (w, b) = params.expect("Linear requires params");
            let x = inputs[0];
            let y = linear_forward(x, w, b);
            (
                y,
                DensePullback {
                    kind,
                    saved: vec![x.clone(), w.clone()],
                    input_rows: x.rows(),
                    a_cols: 0,
                },
            )
        }
        DenseKind::Relu => {
            let x = inputs[0];
            (
                relu_forward(x),
                DensePullback { kind, saved: vec![x.clone()], input_rows: x.rows(), a_cols: 0 },
            )
        }
        DenseKind::Sigmoid => {
            let y = sigmoid_forward(inputs[0]);
            (
                y.clone(),
                DensePullback { kind, saved: vec![y], input_rows: inputs[0].rows(), a_cols: 0 },
            )
        }
        DenseKind::SoftmaxRows => {
            let y = softmax_rows_forward(inputs[0]);
            (
                y.clone(),
                DensePullback { kind, saved: vec![y], input_rows: inputs[0].rows(), a_cols: 0 },
            )
        }
        DenseKind::MeanRows => {
            let x = inputs[0];
            (
                mean_rows_forward(x),
                DensePullback { kind, saved: vec![], input_rows: x.rows(), a_cols: 0 },
            )
        }
        DenseKind::Add => {
            let y = inputs[0].add(inputs[1]);
            (y, DensePullback { kind, saved: vec![], input_rows: inputs[0].rows(), a_cols: 0 })
        }
        DenseKind::ElementwiseMul => {
            let (a, b) = (inputs[0], inputs[1]);
            (
                a.zip_map(b, |x, y| x * y),
                DensePullback {
                    kind,
                    saved: vec![a.clone(), b.clone()],
                    input_rows: a.rows(),
                    a_cols: 0,
                },
            )
        }
        DenseKind::ConcatCols => {
            let (a, b) = (inputs[0], inputs[1]);
            (
                concat_cols_forward(a, b),
                DensePullback { kind, saved: vec![], input_rows: a.rows(), a_cols: a.cols() },
            )
        }
    }
}
