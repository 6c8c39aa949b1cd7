//! Kernel specifications, Gram matrices over treatment embeddings and user
//! covariates, Nystrom low-rank approximation, and plain kernel ridge
//! regression.
//!
//! Conventions fixed here and used everywhere else:
//! - gaussian kernel `exp(-||a-b||^2 / (2 l^2))`,
//! - KRR weights solve `(K + n*lambda*I) alpha = y`,
//! - default diagonal jitter `1e-8 * trace / n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, DenseMatrix, NumericsError};
use crate::seeding::{self, streams};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error("jitter requires a symmetric Gram")]
    NotSymmetric,
    #[error("invalid landmark count {got} for {n} points")]
    BadLandmarks { got: usize, n: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Diagonal jitter scale applied wherever a Gram matrix must be inverted.
pub const DEFAULT_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian { lengthscale: f64 },
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { lengthscale } => {
                if !(lengthscale.is_finite() && *lengthscale > 0.0) {
                    return Err(KernelError::InvalidSpec(format!(
                        "gaussian lengthscale must be positive, got {lengthscale}"
                    )));
                }
            }
            KernelSpec::Linear => {}
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { lengthscale } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelSpec::Linear => numerics::dot(a, b),
        }
    }
}

/// Median pairwise distance of the rows of `points`; the standard data-driven
/// gaussian lengthscale. Falls back to 1.0 when all points coincide.
pub fn median_lengthscale(points: &DenseMatrix) -> f64 {
    let n = points.rows();
    let mut dists = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if dists.len() % 2 == 1 {
        dists[dists.len() / 2]
    } else {
        0.5 * (dists[dists.len() / 2 - 1] + dists[dists.len() / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramMatrix {
    pub values: DenseMatrix,
    pub spec: KernelSpec,
    /// True iff built from a single point set (rows == cols, K[i,j]=K[j,i]).
    pub symmetric: bool,
}

/// Cross-Gram `K[i,j] = k(a_i, b_j)`; one point per row.
pub fn gram(spec: &KernelSpec, a: &DenseMatrix, b: &DenseMatrix) -> Result<GramMatrix> {
    spec.validate()?;
    if a.cols() != b.cols() {
        return Err(KernelError::DimensionMismatch(format!(
            "point dimensions {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let values = DenseMatrix::from_fn(a.rows(), b.rows(), |i, j| spec.eval(a.row(i), b.row(j)));
    Ok(GramMatrix { values, spec: spec.clone(), symmetric: false })
}

/// Symmetric Gram over a single point set.
pub fn gram_sym(spec: &KernelSpec, points: &DenseMatrix) -> Result<GramMatrix> {
    spec.validate()?;
    let n = points.rows();
    let mut values = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(points.row(i), points.row(j));
            values.set(i, j, v);
            values.set(j, i, v);
        }
    }
    Ok(GramMatrix { values, spec: spec.clone(), symmetric: true })
}

/// Add `delta_scale * trace / n` to the diagonal of a symmetric Gram.
pub fn jitter(g: &GramMatrix, delta_scale: f64) -> Result<GramMatrix> {
    if !g.symmetric {
        return Err(KernelError::NotSymmetric);
    }
    if !(delta_scale.is_finite() && delta_scale >= 0.0) {
        return Err(KernelError::InvalidSpec(format!(
            "jitter scale must be nonnegative, got {delta_scale}"
        )));
    }
    if delta_scale == 0.0 {
        return Ok(g.clone());
    }
    let n = g.values.rows();
    let delta = delta_scale * g.values.trace() / n as f64;
    let mut values = g.values.clone();
    for i in 0..n {
        values.set(i, i, values.get(i, i) + delta);
    }
    Ok(GramMatrix { values, spec: g.spec.clone(), symmetric: true })
}

/// Nystrom factor `F` (n x m) with `F F' ~= K`, built from `m` seeded
/// landmark points. Exact when every point is a landmark.
pub fn nystrom(
    spec: &KernelSpec,
    points: &DenseMatrix,
    m_landmarks: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    let n = points.rows();
    if m_landmarks == 0 || m_landmarks > n {
        return Err(KernelError::BadLandmarks { got: m_landmarks, n });
    }
    let mut rng = seeding::stream_rng(seed, streams::NYSTROM);
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher-Yates, then sort for a canonical landmark order
    for i in 0..m_landmarks {
        let j = i + (rand::Rng::gen_range(&mut rng, 0..(n - i) as u64) as usize);
        idx.swap(i, j);
    }
    let mut landmarks = idx[..m_landmarks].to_vec();
    landmarks.sort_unstable();

    let lm_points = points.select_rows(&landmarks);
    let k_mm = jitter(&gram_sym(spec, &lm_points)?, DEFAULT_JITTER)?;
    let l = numerics::cholesky(&k_mm.values).map_err(|_| {
        KernelError::Numerics(NumericsError::Singular("landmark Gram after jitter".into()))
    })?;
    let k_nm = gram(spec, points, &lm_points)?.values;
    // F = K_nm * L^{-T}: forward-substitute each row against L
    let mut f = DenseMatrix::zeros(n, m_landmarks);
    for i in 0..n {
        let mut row = k_nm.row(i).to_vec();
        for j in 0..m_landmarks {
            for k in 0..j {
                row[j] -= l.get(j, k) * row[k];
            }
            row[j] /= l.get(j, j);
        }
        f.row_mut(i).copy_from_slice(&row);
    }
    Ok(f)
}

/// Fitted kernel ridge regression model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrrModel {
    pub points: DenseMatrix,
    pub weights: Vec<f64>,
    pub spec: KernelSpec,
    pub lambda: f64,
}

/// Fit KRR: weights solve `(K + n*lambda*I) alpha = y`.
pub fn krr_fit(x: &DenseMatrix, y: &[f64], spec: &KernelSpec, lambda: f64) -> Result<KrrModel> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(KernelError::InvalidSpec(format!("lambda must be positive, got {lambda}")));
    }
    let n = x.rows();
    if y.len() != n {
        return Err(KernelError::DimensionMismatch(format!(
            "{} points vs {} responses",
            n,
            y.len()
        )));
    }
    let mut k = gram_sym(spec, x)?.values;
    let shift = n as f64 * lambda;
    for i in 0..n {
        k.set(i, i, k.get(i, i) + shift);
    }
    let weights = numerics::solve_spd(&k, y)?;
    Ok(KrrModel { points: x.clone(), weights, spec: spec.clone(), lambda })
}

/// Weighted KRR on grouped observations: minimizes
/// `(1/2W) sum_i w_i (y_i - f(x_i))^2 + (lambda/2) ||f||^2` under the same
/// lambda convention as `krr_fit`, i.e. solves `(W_d K + W*lambda*I) alpha = W_d y`.
pub fn krr_fit_weighted(
    x: &DenseMatrix,
    y: &[f64],
    weights: &[f64],
    spec: &KernelSpec,
    lambda: f64,
) -> Result<KrrModel> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(KernelError::InvalidSpec(format!("lambda must be positive, got {lambda}")));
    }
    let n = x.rows();
    if y.len() != n || weights.len() != n {
        return Err(KernelError::DimensionMismatch("weighted krr input lengths".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(KernelError::InvalidSpec("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    let k = gram_sym(spec, x)?.values;
    let mut sys = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sys.set(i, j, weights[i] * k.get(i, j));
        }
        sys.set(i, i, sys.get(i, i) + total * lambda);
    }
    let rhs: Vec<f64> = (0..n).map(|i| weights[i] * y[i]).collect();
    let alpha = numerics::lu_solve(&sys, &rhs)?;
    Ok(KrrModel { points: x.clone(), weights: alpha, spec: spec.clone(), lambda })
}

/// Predict at query points: `gram(spec, query, points) * weights`.
pub fn krr_predict(model: &KrrModel, query: &DenseMatrix) -> Result<Vec<f64>> {
    if query.cols() != model.points.cols() {
        return Err(KernelError::DimensionMismatch(format!(
            "query dimension {} vs training {}",
            query.cols(),
            model.points.cols()
        )));
    }
    let k = gram(&model.spec, query, &model.points)?.values;
    Ok(k.matvec(&model.weights))
}
