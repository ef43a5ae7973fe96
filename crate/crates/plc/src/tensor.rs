//! Dense tensor storage and the multilinear primitives everything else is
//! built on: mode unfoldings, Khatri-Rao products, Kruskal reconstruction and
//! ridge-regularized least-squares solves.
//!
//! Layout convention throughout the crate: row-major with the last index
//! varying fastest, and Khatri-Rao products ordered first-matrix-slowest.
//! With that choice the sample-mode unfolding of a tensor is just its flat
//! data reinterpreted as rows.

use crate::error::{Error, Result};
use crate::linalg;

/// Dense order-d tensor of f64 values, row-major, last index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Build a tensor from explicit dims and flat data.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("invalid dims {dims:?}")));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                expected
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("tensor contains non-finite entries".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len: usize = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Frobenius norm of the whole tensor.
    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Contiguous slice of sample `n` (first mode index fixed to n).
    pub fn sample_slice(&self, n: usize) -> &[f64] {
        let stride: usize = self.dims[1..].iter().product();
        &self.data[n * stride..(n + 1) * stride]
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from nested row slices; handy in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
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

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// self * other.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix self^T * self.
    pub fn gram(&self) -> Matrix {
        let r = self.cols;
        let mut out = Matrix::zeros(r, r);
        for row in 0..self.rows {
            let x = self.row(row);
            for i in 0..r {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                for j in 0..r {
                    out.data[i * r + j] += xi * x[j];
                }
            }
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// CP decomposition state: per-sample weight rows plus shared factors.
#[derive(Debug, Clone)]
pub struct KruskalModel {
    /// N x R feature matrix, one row per sample.
    pub weights: Matrix,
    /// Factor matrices for the non-sample modes, each I_k x R.
    pub factors: Vec<Matrix>,
    pub rank: usize,
}

impl KruskalModel {
    pub fn new(weights: Matrix, factors: Vec<Matrix>) -> Result<Self> {
        let rank = weights.cols();
        if factors.len() < 2 {
            return Err(Error::Dimension(
                "a Kruskal model needs at least two non-sample factors".into(),
            ));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.cols() != rank {
                return Err(Error::Dimension(format!(
                    "factor {k} has {} columns, expected rank {rank}",
                    f.cols()
                )));
            }
        }
        Ok(Self { weights, factors, rank })
    }

    /// Tensor dims [N, I_1, ..., I_K] this model reconstructs to.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.factors.len() + 1);
        d.push(self.weights.rows());
        d.extend(self.factors.iter().map(|f| f.rows()));
        d
    }
}

/// Mode-`mode` unfolding: rows index the chosen mode, columns the remaining
/// modes in original order with the last one fastest.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    if mode >= t.order() {
        return Err(Error::Dimension(format!(
            "mode {mode} out of range for order {}",
            t.order()
        )));
    }
    let dims = t.dims();
    let n_rows = dims[mode];
    let n_cols: usize = t.len() / n_rows;
    if mode == 0 {
        // zero-copy layout: each sample is already contiguous
        return Matrix::new(n_rows, n_cols, t.data().to_vec());
    }
    let mut out = Matrix::zeros(n_rows, n_cols);
    // strides of the original tensor
    let order = t.order();
    let mut strides = vec![1usize; order];
    for k in (0..order - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let other: Vec<usize> = (0..order).filter(|&k| k != mode).collect();
    let mut idx = vec![0usize; order];
    for col in 0..n_cols {
        // decode col into the non-mode indices, last fastest
        let mut rem = col;
        for &k in other.iter().rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        let base: usize = other.iter().map(|&k| idx[k] * strides[k]).sum();
        for r in 0..n_rows {
            out.data[r * n_cols + col] = t.data()[base + r * strides[mode]];
        }
    }
    Ok(out)
}

/// Sample-mode unfolding of an order >= 3 tensor: one contiguous row per sample.
pub fn unfold_samples(t: &DenseTensor) -> Result<Matrix> {
    if t.order() < 3 {
        return Err(Error::Dimension(format!(
            "sample unfolding needs order >= 3, got {}",
            t.order()
        )));
    }
    unfold(t, 0)
}

/// Khatri-Rao (columnwise Kronecker) product, first matrix slowest.
pub fn khatri_rao(ms: &[&Matrix]) -> Result<Matrix> {
    if ms.is_empty() {
        return Err(Error::Dimension("khatri_rao of empty list".into()));
    }
    let r = ms[0].cols();
    for m in ms {
        if m.cols() != r {
            return Err(Error::Dimension(format!(
                "khatri_rao column mismatch: {} vs {}",
                m.cols(),
                r
            )));
        }
    }
    let mut out = ms[0].clone();
    for m in &ms[1..] {
        let rows = out.rows() * m.rows();
        let mut next = Matrix::zeros(rows, r);
        for i in 0..out.rows() {
            for j in 0..m.rows() {
                let row = i * m.rows() + j;
                for c in 0..r {
                    next.data[row * r + c] = out.at(i, c) * m.at(j, c);
                }
            }
        }
        out = next;
    }
    Ok(out)
}

/// Reconstruct the dense tensor of a Kruskal model:
/// x[n, i_1, ..., i_K] = sum_r W[n,r] * prod_k F_k[i_k, r].
pub fn kruskal_reconstruct(m: &KruskalModel) -> Result<DenseTensor> {
    let factor_refs: Vec<&Matrix> = m.factors.iter().collect();
    let kr = khatri_rao(&factor_refs)?;
    // unfolded sample-mode reconstruction is W * KR^T; its flat data is the tensor
    let recon = m.weights.matmul(&kr.transpose())?;
    DenseTensor::new(m.dims(), recon.data)
}

/// Half squared Frobenius distance between a tensor and a model's
/// reconstruction.
pub fn reconstruction_error(t: &DenseTensor, m: &KruskalModel) -> Result<f64> {
    if t.dims() != m.dims().as_slice() {
        return Err(Error::Dimension(format!(
            "tensor dims {:?} vs model dims {:?}",
            t.dims(),
            m.dims()
        )));
    }
    let recon = kruskal_reconstruct(m)?;
    let sum: f64 = t
        .data()
        .iter()
        .zip(recon.data().iter())
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum();
    Ok(0.5 * sum)
}

/// Hadamard product of the Gram matrices of the inputs. Equals
/// khatri_rao(ms)^T * khatri_rao(ms) without materializing the product.
pub fn gram_hadamard(ms: &[&Matrix]) -> Result<Matrix> {
    if ms.is_empty() {
        return Err(Error::Dimension("gram_hadamard of empty list".into()));
    }
    let r = ms[0].cols();
    for m in ms {
        if m.cols() != r {
            return Err(Error::Dimension(format!(
                "gram_hadamard column mismatch: {} vs {}",
                m.cols(),
                r
            )));
        }
    }
    let mut out = ms[0].gram();
    for m in &ms[1..] {
        let g = m.gram();
        for (o, &gv) in out.data.iter_mut().zip(g.data.iter()) {
            *o *= gv;
        }
    }
    Ok(out)
}

/// Solve X (G + alpha I) = RHS for X, with G symmetric and G + alpha I
/// positive definite, via Cholesky. Fails loudly when the system is not SPD.
pub fn solve_ridge(g: &Matrix, rhs: &Matrix, alpha: f64) -> Result<Matrix> {
    let r = g.rows();
    if g.cols() != r {
        return Err(Error::Dimension(format!("G must be square, got {}x{}", g.rows(), g.cols())));
    }
    if rhs.cols() != r {
        return Err(Error::Dimension(format!(
            "RHS has {} columns, expected {}",
            rhs.cols(),
            r
        )));
    }
    if alpha < 0.0 {
        return Err(Error::Config("ridge alpha must be nonnegative".into()));
    }
    let mut reg = g.clone();
    for i in 0..r {
        reg.data[i * r + i] += alpha;
    }
    let l = linalg::cholesky(&reg.data, r)?;
    let mut out = Matrix::zeros(rhs.rows(), r);
    let mut col = vec![0.0; r];
    for i in 0..rhs.rows() {
        col.copy_from_slice(rhs.row(i));
        linalg::cholesky_solve(&l, r, &mut col);
        out.row_mut(i).copy_from_slice(&col);
    }
    Ok(out)
}

/// Scale each nonzero row to unit Euclidean norm. Zero rows stay zero and
/// report a scale of 0, so they drop out of every Laplacian term.
pub fn normalize_rows(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = m.clone();
    let mut scales = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let mut norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        // rows already unit-length up to rounding keep their bits, which makes
        // a second normalization pass exactly idempotent
        if (norm - 1.0).abs() < 32.0 * f64::EPSILON {
            norm = 1.0;
        }
        if norm == 1.0 {
            scales.push(1.0);
        } else if norm > 0.0 {
            let s = 1.0 / norm;
            for v in out.row_mut(i) {
                *v *= s;
            }
            scales.push(s);
        } else {
            scales.push(0.0);
        }
    }
    (out, scales)
}
