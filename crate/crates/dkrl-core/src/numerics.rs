//! Dense linear algebra shared by every other module: row-major matrices,
//! Cholesky/LU solves, one-sided Jacobi SVD, generalized ridge regression,
//! and singular-value soft-thresholding.
//!
//! Everything here is deterministic: no randomized pivoting, no
//! thread-dependent reductions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("SVD failed to converge after {0} sweeps")]
    NonConvergence(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Row-major dense matrix of `f64`. Every entry is finite; constructors and
/// deserialization reject NaN/Inf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = NumericsError;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::from_vec(raw.rows, raw.cols, raw.data)
    }
}

impl From<DenseMatrix> for RawMatrix {
    fn from(m: DenseMatrix) -> Self {
        RawMatrix { rows: m.rows, cols: m.cols, data: m.data }
    }
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "expected {}x{}={} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite("matrix data".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(NumericsError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self.set(i, j, v[i]);
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`, ikj loop order for row-major locality.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, v))
            .collect()
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stack a subset of rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Singular value decomposition `m = left * diag(singulars) * right_t` with
/// `k = min(rows, cols)`, singular values sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singulars: Vec<f64>,
    pub right_t: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        let k = self.singulars.len();
        let mut scaled = self.left.clone();
        for i in 0..scaled.rows() {
            for j in 0..k {
                let v = scaled.get(i, j) * self.singulars[j];
                scaled.set(i, j, v);
            }
        }
        scaled.matmul(&self.right_t)
    }
}

/// One-sided Jacobi SVD. Deterministic cyclic sweeps; cap of
/// `100 * min(rows, cols)` sweeps before reporting non-convergence.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    if !m.all_finite() {
        return Err(NumericsError::NonFinite("svd input".into()));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(NumericsError::InvalidArgument("svd of empty matrix".into()));
    }
    if m.rows() >= m.cols() {
        jacobi_svd_tall(m)
    } else {
        // factor the transpose and swap the factors
        let t = jacobi_svd_tall(&m.transpose())?;
        Ok(SvdResult {
            left: t.right_t.transpose(),
            singulars: t.singulars,
            right_t: t.left.transpose(),
        })
    }
}

fn jacobi_svd_tall(m: &DenseMatrix) -> Result<SvdResult> {
    let (rows, cols) = (m.rows(), m.cols());
    debug_assert!(rows >= cols);
    // columns of `w` rotate toward mutual orthogonality; `v` accumulates the
    // right-hand rotations
    let mut w = m.clone();
    let mut v = DenseMatrix::identity(cols);
    let scale = m.max_abs();
    if scale == 0.0 {
        // zero matrix: orthonormal factors with zero singulars
        let left = DenseMatrix::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 });
        return Ok(SvdResult { left, singulars: vec![0.0; cols], right_t: v });
    }
    let tol = 1e-15;
    let max_sweeps = 100 * cols.max(1);
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(f64::MIN_POSITIVE));
                // Jacobi rotation annihilating the (p,q) inner product
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..cols {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::NonConvergence(max_sweeps));
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| w.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut left = DenseMatrix::zeros(rows, cols);
    let mut right = DenseMatrix::zeros(cols, cols);
    let mut singulars = vec![0.0; cols];
    let rank_floor = scale * (rows as f64).sqrt() * 1e-300f64.max(f64::EPSILON);
    let mut null_cols = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        singulars[k] = norms[j];
        if norms[j] > rank_floor {
            for i in 0..rows {
                left.set(i, k, w.get(i, j) / norms[j]);
            }
        } else {
            singulars[k] = 0.0;
            null_cols.push(k);
        }
        for i in 0..cols {
            right.set(i, k, v.get(i, j));
        }
    }
    if !null_cols.is_empty() {
        complete_orthonormal(&mut left, &null_cols);
    }
    Ok(SvdResult { left, singulars, right_t: right.transpose() })
}

/// Fill the listed columns with vectors orthonormal to every other column,
/// via Gram-Schmidt over the standard basis. Deterministic.
fn complete_orthonormal(m: &mut DenseMatrix, fill: &[usize]) {
    let rows = m.rows();
    let cols = m.cols();
    let mut next_basis = 0usize;
    for &col in fill {
        loop {
            assert!(next_basis < rows, "cannot complete orthonormal basis");
            let mut v = vec![0.0; rows];
            v[next_basis] = 1.0;
            next_basis += 1;
            for j in 0..cols {
                if fill.contains(&j) && j >= col {
                    continue;
                }
                let proj: f64 = (0..rows).map(|i| v[i] * m.get(i, j)).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= proj * m.get(i, j);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, vi) in v.iter().enumerate() {
                    m.set(i, col, vi / norm);
                }
                break;
            }
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch("cholesky of non-square".into()));
    }
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(a.get(i, i).abs()));
    let pivot_floor = max_diag * (n as f64) * f64::EPSILON;
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d.is_finite()) || d <= pivot_floor {
            return Err(NumericsError::Singular(format!(
                "cholesky pivot {} at column {}",
                d, j
            )));
        }
        let dj = d.sqrt();
        l.set(j, j, dj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / dj);
        }
    }
    Ok(l)
}

/// Solve `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn solve_spd(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Solve with a precomputed Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}

/// Solve `a X = B` column-by-column for SPD `a`.
pub fn solve_spd_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch("solve_spd_matrix".into()));
    }
    let l = cholesky(a)?;
    let mut out = DenseMatrix::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let col = cholesky_solve(&l, &b.column(j));
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Solve a general square system `a x = b` via LU with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch("lu_solve of non-square".into()));
    }
    let n = a.rows();
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch("lu_solve rhs length".into()));
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = lu.max_abs();
    let pivot_floor = scale * (n as f64) * f64::EPSILON;
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let v = lu.get(i, k).abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = i;
            }
        }
        if pivot_val <= pivot_floor {
            return Err(NumericsError::Singular(format!("lu pivot at column {}", k)));
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = lu.get(k, j);
                lu.set(k, j, lu.get(pivot_row, j));
                lu.set(pivot_row, j, tmp);
            }
            perm.swap(k, pivot_row);
            x.swap(k, pivot_row);
        }
        let d = lu.get(k, k);
        for i in (k + 1)..n {
            let f = lu.get(i, k) / d;
            lu.set(i, k, f);
            if f != 0.0 {
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - f * lu.get(k, j);
                    lu.set(i, j, v);
                }
                x[i] -= f * x[k];
            }
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= lu.get(i, j) * x[j];
        }
        x[i] /= lu.get(i, i);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite("lu_solve solution".into()));
    }
    Ok(x)
}

/// Generalized ridge regression: returns `w` solving
/// `(design' design + lambda * penalty) w = design' response`.
///
/// `penalty` must be symmetric PSD. With `lambda = 0` the design must have
/// full column rank, otherwise the normal matrix is singular.
pub fn ridge_solve(
    design: &DenseMatrix,
    response: &[f64],
    lambda: f64,
    penalty: &DenseMatrix,
) -> Result<Vec<f64>> {
    let (n, d) = (design.rows(), design.cols());
    if response.len() != n {
        return Err(NumericsError::DimensionMismatch("ridge response length".into()));
    }
    if penalty.rows() != d || penalty.cols() != d {
        return Err(NumericsError::DimensionMismatch("ridge penalty shape".into()));
    }
    if lambda < 0.0 {
        return Err(NumericsError::InvalidArgument("negative lambda".into()));
    }
    if !penalty.is_symmetric(1e-8 * (1.0 + penalty.max_abs())) {
        return Err(NumericsError::InvalidArgument("penalty not symmetric".into()));
    }
    // G = A'A + lambda * P, rhs = A'y
    let mut g = DenseMatrix::zeros(d, d);
    for i in 0..n {
        let row = design.row(i);
        for p in 0..d {
            let a = row[p];
            if a == 0.0 {
                continue;
            }
            let grow = g.row_mut(p);
            for q in 0..d {
                grow[q] += a * row[q];
            }
        }
    }
    if lambda > 0.0 {
        for p in 0..d {
            for q in 0..d {
                let v = g.get(p, q) + lambda * penalty.get(p, q);
                g.set(p, q, v);
            }
        }
    }
    let mut rhs = vec![0.0; d];
    for i in 0..n {
        let row = design.row(i);
        let yi = response[i];
        for p in 0..d {
            rhs[p] += row[p] * yi;
        }
    }
    solve_spd(&g, &rhs)
}

/// Nuclear norm: sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(svd(m)?.singulars.iter().sum())
}

/// Singular value soft-thresholding: singular values are replaced by
/// `max(sigma - tau, 0)`, factors unchanged.
pub fn svt(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if tau < 0.0 {
        return Err(NumericsError::InvalidArgument("negative threshold".into()));
    }
    let mut dec = svd(m)?;
    for s in dec.singulars.iter_mut() {
        *s = (*s - tau).max(0.0);
    }
    Ok(dec.reconstruct())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn svd_identity_singulars() {
        let dec = svd(&DenseMatrix::identity(3)).unwrap();
        for s in &dec.singulars {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_diagonal_singulars_sorted() {
        let dec = svd(&DenseMatrix::diag(&[3.0, 1.0])).unwrap();
        assert!((dec.singulars[0] - 3.0).abs() < 1e-12);
        assert!((dec.singulars[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_seeded_rectangular() {
        let m = random_matrix(4, 3, 7);
        let dec = svd(&m).unwrap();
        let err = dec.reconstruct().sub(&m).frobenius_norm();
        assert!(err < 1e-10 * (1.0 + m.frobenius_norm()), "err = {err}");
        // wide case goes through the transpose path
        let m = random_matrix(3, 5, 9);
        let dec = svd(&m).unwrap();
        let err = dec.reconstruct().sub(&m).frobenius_norm();
        assert!(err < 1e-10 * (1.0 + m.frobenius_norm()), "err = {err}");
    }

    #[test]
    fn svd_rank_deficient_keeps_orthonormal_left() {
        // rank-1 3x2: second singular value is 0, left must stay orthonormal
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, -0.25];
        let m = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let dec = svd(&m).unwrap();
        assert!(dec.singulars[1].abs() < 1e-12);
        for a in 0..2 {
            for b in 0..2 {
                let d: f64 = (0..3).map(|i| dec.left.get(i, a) * dec.left.get(i, b)).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10);
            }
        }
        let err = dec.reconstruct().sub(&m).frobenius_norm();
        assert!(err < 1e-10 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn ridge_identity_case() {
        // (I + I) w = y  =>  w = y / 2
        let w = ridge_solve(
            &DenseMatrix::identity(2),
            &[1.0, 2.0],
            1.0,
            &DenseMatrix::identity(2),
        )
        .unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_lambda_zero_exact() {
        let a = DenseMatrix::from_vec(2, 2, vec![2.0, 1.0, 0.5, 3.0]).unwrap();
        let y = [1.0, -2.0];
        let w = ridge_solve(&a, &y, 0.0, &DenseMatrix::identity(2)).unwrap();
        let pred = a.matvec(&w);
        assert!((pred[0] - y[0]).abs() < 1e-10);
        assert!((pred[1] - y[1]).abs() < 1e-10);
    }

    #[test]
    fn ridge_normal_equation_residual() {
        let a = random_matrix(10, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let penalty = DenseMatrix::identity(4);
        let w = ridge_solve(&a, &y, 0.3, &penalty).unwrap();
        // residual of (A'A + lambda P) w - A'y
        let at = a.transpose();
        let aty = at.matvec(&y);
        let g = at.matmul(&a).add(&penalty.scale(0.3));
        let lhs = g.matvec(&w);
        let res: f64 = lhs
            .iter()
            .zip(&aty)
            .map(|(l, r)| (l - r).powi(2))
            .sum::<f64>()
            .sqrt();
        let rhs_norm = aty.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res < 1e-10 * (1.0 + rhs_norm));
    }

    #[test]
    fn ridge_singular_without_penalty_errors() {
        // two identical columns, lambda = 0
        let a = DenseMatrix::from_vec(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let err = ridge_solve(&a, &[1.0, 2.0, 3.0], 0.0, &DenseMatrix::identity(2));
        assert!(matches!(err, Err(NumericsError::Singular(_))));
    }

    #[test]
    fn nuclear_norm_cases() {
        assert!((nuclear_norm(&DenseMatrix::diag(&[3.0, 4.0])).unwrap() - 7.0).abs() < 1e-10);
        assert!(nuclear_norm(&DenseMatrix::zeros(3, 2)).unwrap().abs() < 1e-12);
        let u = [1.0, -2.0, 0.5];
        let v = [2.0, 1.0];
        let m = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((nuclear_norm(&m).unwrap() - nu * nv).abs() < 1e-10);
    }

    #[test]
    fn svt_shrinks_singulars() {
        let out = svt(&DenseMatrix::diag(&[3.0, 1.0]), 1.0).unwrap();
        let dec = svd(&out).unwrap();
        assert!((dec.singulars[0] - 2.0).abs() < 1e-10);
        assert!(dec.singulars[1].abs() < 1e-10);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let m = random_matrix(4, 4, 11);
        let out = svt(&m, 0.0).unwrap();
        assert!(out.sub(&m).frobenius_norm() < 1e-10 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn svt_full_shrinkage_zeroes() {
        let m = random_matrix(3, 3, 13);
        let sigma_max = svd(&m).unwrap().singulars[0];
        let out = svt(&m, sigma_max + 0.1).unwrap();
        assert!(out.frobenius_norm() < 1e-10);
    }

    #[test]
    fn nuclear_triangle_inequality_seeded() {
        for seed in 0..20 {
            let a = random_matrix(4, 3, 100 + seed);
            let b = random_matrix(4, 3, 200 + seed);
            let lhs = nuclear_norm(&a.add(&b)).unwrap();
            let rhs = nuclear_norm(&a).unwrap() + nuclear_norm(&b).unwrap();
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn svt_nonexpansive_seeded() {
        for seed in 0..20 {
            let a = random_matrix(4, 4, 300 + seed);
            let b = random_matrix(4, 4, 400 + seed);
            let tau = 0.3;
            let d_out = svt(&a, tau).unwrap().sub(&svt(&b, tau).unwrap()).frobenius_norm();
            let d_in = a.sub(&b).frobenius_norm();
            assert!(d_out <= d_in + 1e-9);
        }
    }

    #[test]
    fn lu_solves_unsymmetric() {
        let a = DenseMatrix::from_vec(3, 3, vec![0.0, 2.0, 1.0, 1.0, -1.0, 0.5, 3.0, 0.0, -2.0])
            .unwrap();
        let x_true = [1.0, -0.5, 2.0];
        let b = a.matvec(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_rejects_nonfinite() {
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let m = random_matrix(3, 2, 5);
        let s = serde_json::to_string(&m).unwrap();
        let back: DenseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
