//! Dense f64 vector/matrix math, activations, losses, initialization,
//! optimizers and a finite-difference gradient checking harness.
//!
//! Everything downstream (embedding model, recurrent cells, evaluator) is
//! built from these kernels. All gradients in this crate are hand-derived
//! and checked against central differences in the test suites.

pub mod gradcheck;
pub mod optim;
pub mod rng;

pub use gradcheck::finite_difference_check;
pub use optim::{
    AdaDeltaState, AdamState, ADADELTA_EPS, ADADELTA_RHO, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
};
pub use rng::Rng;

use thiserror::Error;

/// Norm threshold below which a vector is treated as degenerate (zero
/// direction) by the cosine kernels.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },
}

fn shape_err(op: &'static str, detail: String) -> TensorError {
    TensorError::Shape { op, detail }
}

/// Row-major dense matrix of f64 values.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, TensorError> {
        if data.len() != rows * cols {
            return Err(shape_err(
                "Matrix::from_vec",
                format!(
                    "{}x{} needs {} values, got {}",
                    rows,
                    cols,
                    rows * cols,
                    data.len()
                ),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix, TensorError> {
        let first = rows.first().ok_or(TensorError::Empty {
            op: "Matrix::from_rows",
        })?;
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(shape_err(
                    "Matrix::from_rows",
                    format!("row 0 has {} columns but row {} has {}", cols, i, row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Identity matrix of size n.
    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// W x for a column vector x of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, TensorError> {
        if x.len() != self.cols {
            return Err(shape_err(
                "matvec",
                format!(
                    "matrix is {}x{} but x has length {}",
                    self.rows,
                    self.cols,
                    x.len()
                ),
            ));
        }
        let out = (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(w, xi)| w * xi).sum())
            .collect();
        Ok(out)
    }

    /// Wᵀ y for a column vector y of length `rows`.
    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>, TensorError> {
        if y.len() != self.rows {
            return Err(shape_err(
                "matvec_transpose",
                format!(
                    "matrix is {}x{} but y has length {}",
                    self.rows,
                    self.cols,
                    y.len()
                ),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (r, yr) in y.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
        Ok(out)
    }

    /// self += scale * (u ⊗ v), the rank-one update used by weight gradients.
    pub fn add_scaled_outer(
        &mut self,
        u: &[f64],
        v: &[f64],
        scale: f64,
    ) -> Result<(), TensorError> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(shape_err(
                "add_scaled_outer",
                format!(
                    "matrix is {}x{} but outer product is {}x{}",
                    self.rows,
                    self.cols,
                    u.len(),
                    v.len()
                ),
            ));
        }
        for (r, ur) in u.iter().enumerate() {
            let s = scale * ur;
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, vc) in row.iter_mut().zip(v) {
                *w += s * vc;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// W x + b.
pub fn linear_forward(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>, TensorError> {
    if w.cols() != x.len() {
        return Err(shape_err(
            "linear_forward",
            format!(
                "W is {}x{} but x has length {}",
                w.rows(),
                w.cols(),
                x.len()
            ),
        ));
    }
    if w.rows() != b.len() {
        return Err(shape_err(
            "linear_forward",
            format!(
                "W is {}x{} but b has length {}",
                w.rows(),
                w.cols(),
                b.len()
            ),
        ));
    }
    let mut out = w.matvec(x)?;
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}

/// Gradients of a linear layer, given the upstream gradient on its output.
#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub weight: Matrix,
    pub input: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Backward pass of `linear_forward`: grad_W = g ⊗ x, grad_x = Wᵀ g, grad_b = g.
pub fn linear_backward(
    w: &Matrix,
    x: &[f64],
    grad_out: &[f64],
) -> Result<LinearGrads, TensorError> {
    if w.cols() != x.len() || w.rows() != grad_out.len() {
        return Err(shape_err(
            "linear_backward",
            format!(
                "W is {}x{} but x has length {} and grad_out has length {}",
                w.rows(),
                w.cols(),
                x.len(),
                grad_out.len()
            ),
        ));
    }
    let mut weight = Matrix::zeros(w.rows(), w.cols());
    weight.add_scaled_outer(grad_out, x, 1.0)?;
    Ok(LinearGrads {
        weight,
        input: w.matvec_transpose(grad_out)?,
        bias: grad_out.to_vec(),
    })
}

/// Numerically stabilized softmax (max subtraction).
pub fn softmax(v: &[f64]) -> Result<Vec<f64>, TensorError> {
    if v.is_empty() {
        return Err(TensorError::Empty { op: "softmax" });
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Cross entropy `−ln p̂[y]` together with its gradient with respect to
/// the pre-softmax logits, p̂ − onehot(y).
pub fn cross_entropy(p_hat: &[f64], y: usize) -> Result<(f64, Vec<f64>), TensorError> {
    if y >= p_hat.len() {
        return Err(TensorError::IndexOutOfRange {
            op: "cross_entropy",
            index: y,
            len: p_hat.len(),
        });
    }
    let loss = -p_hat[y].ln();
    let mut grad = p_hat.to_vec();
    grad[y] -= 1.0;
    Ok((loss, grad))
}

/// Incremental column-wise max over rows, recording the argmax row per
/// column for backprop. Ties keep the lowest row index.
#[derive(Clone, Debug)]
pub struct MaxPoolAccum {
    max: Vec<f64>,
    argmax: Vec<usize>,
    count: usize,
}

impl MaxPoolAccum {
    pub fn new(dim: usize) -> MaxPoolAccum {
        MaxPoolAccum {
            max: vec![f64::NEG_INFINITY; dim],
            argmax: vec![0; dim],
            count: 0,
        }
    }

    pub fn push(&mut self, row: &[f64]) -> Result<(), TensorError> {
        if row.len() != self.max.len() {
            return Err(shape_err(
                "maxpool",
                format!(
                    "expected rows of length {}, got {}",
                    self.max.len(),
                    row.len()
                ),
            ));
        }
        for (j, &v) in row.iter().enumerate() {
            if v > self.max[j] {
                self.max[j] = v;
                self.argmax[j] = self.count;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn rows_seen(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<(Vec<f64>, Vec<usize>), TensorError> {
        if self.count == 0 {
            return Err(TensorError::Empty { op: "maxpool" });
        }
        Ok((self.max, self.argmax))
    }
}

/// Column-wise max over the given rows; returns the pooled vector and the
/// argmax row index per column.
pub fn maxpool_columns(rows: &[&[f64]]) -> Result<(Vec<f64>, Vec<usize>), TensorError> {
    let first = rows.first().ok_or(TensorError::Empty { op: "maxpool" })?;
    let mut acc = MaxPoolAccum::new(first.len());
    for row in rows {
        acc.push(row)?;
    }
    acc.finish()
}

/// Routes the pooled gradient back to the argmax rows; all other entries
/// receive zero.
pub fn maxpool_backward(argmax: &[usize], grad_out: &[f64], num_rows: usize) -> Vec<Vec<f64>> {
    let mut grads = vec![vec![0.0; grad_out.len()]; num_rows];
    for (j, (&r, &g)) in argmax.iter().zip(grad_out).enumerate() {
        grads[r][j] = g;
    }
    grads
}

pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

/// tanh' expressed through the activation output: 1 − t².
pub fn tanh_deriv_from_output(t: f64) -> f64 {
    1.0 - t * t
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// σ' expressed through the activation output: s(1 − s).
pub fn sigmoid_deriv_from_output(s: f64) -> f64 {
    s * (1.0 - s)
}

/// Cosine distance 1 − cos(a, b) with gradients for both arguments.
#[derive(Clone, Debug)]
pub struct CosineDistance {
    pub value: f64,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
}

/// Value lies in [0, 2]. A vector with norm below `NORM_EPS` yields the
/// uninformative distance 1 with zero gradients.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<CosineDistance, TensorError> {
    if a.len() != b.len() {
        return Err(shape_err(
            "cosine_distance",
            format!("a has length {} but b has length {}", a.len(), b.len()),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 < NORM_EPS * NORM_EPS || nb2 < NORM_EPS * NORM_EPS {
        return Ok(CosineDistance {
            value: 1.0,
            grad_a: vec![0.0; a.len()],
            grad_b: vec![0.0; b.len()],
        });
    }
    let denom = (na2 * nb2).sqrt();
    let value = 1.0 - dot / denom;
    // d(1 − cos)/da_i = (cos·a_i/‖a‖² − b_i/‖a‖‖b‖) = (dot·a_i/na2 − b_i)/denom
    let grad_a = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| (dot * ai / na2 - bi) / denom)
        .collect();
    let grad_b = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| (dot * bi / nb2 - ai) / denom)
        .collect();
    Ok(CosineDistance {
        value,
        grad_a,
        grad_b,
    })
}

/// Cosine similarity in [−1, 1]; degenerate (near-zero-norm) vectors score 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, TensorError> {
    if a.len() != b.len() {
        return Err(shape_err(
            "cosine_similarity",
            format!("a has length {} but b has length {}", a.len(), b.len()),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 < NORM_EPS * NORM_EPS || nb2 < NORM_EPS * NORM_EPS {
        return Ok(0.0);
    }
    Ok(dot / (na2 * nb2).sqrt())
}

/// Xavier/Glorot uniform initialization: entries drawn from
/// ±sqrt(6 / (rows + cols)).
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_in(-bound, bound))
        .collect();
    Matrix { rows, cols, data }
}
