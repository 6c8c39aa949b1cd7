//! Independent brute-force reference implementations used to certify the
//! main solvers. Nothing here calls the solver it checks; only `numerics`
//! primitives are shared. Guardrails hard-fail rather than downsample.

use thiserror::Error;

use crate::numerics::{self, DenseMatrix};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("guardrail exceeded: {0}")]
    Guardrail(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Exact joint minimizer of the U-step objective over all `r*n` unknowns,
/// posed as one dense generalized ridge system. Certifies that repeated
/// column sweeps reach the same objective value.
pub fn exact_vec_solve_u(
    gram_g: &DenseMatrix,
    gram_h: &DenseMatrix,
    y: &[f64],
    v: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    let n = gram_g.rows();
    let r = v.cols();
    if gram_g.cols() != n || gram_h.rows() != n || gram_h.cols() != n {
        return Err(OracleError::InvalidArgument("Grams must be n x n".into()));
    }
    if v.rows() != n || y.len() != n {
        return Err(OracleError::InvalidArgument("V and y must match n".into()));
    }
    if r * n > 400 {
        return Err(OracleError::Guardrail(format!("r*n = {} > 400", r * n)));
    }
    // partner scores S = K_h V; row k of the design is the concatenation over
    // columns l of S[k,l] * K_g[k,:]
    let s = gram_h.matmul(v);
    let mut design = DenseMatrix::zeros(n, r * n);
    for k in 0..n {
        let grow = gram_g.row(k);
        let drow = design.row_mut(k);
        for l in 0..r {
            let w = s.get(k, l);
            for i in 0..n {
                drow[l * n + i] = w * grow[i];
            }
        }
    }
    let mut penalty = DenseMatrix::zeros(r * n, r * n);
    for l in 0..r {
        for i in 0..n {
            for j in 0..n {
                penalty.set(l * n + i, l * n + j, gram_g.get(i, j));
            }
        }
    }
    let vec_u = numerics::ridge_solve(&design, y, 2.0 * n as f64 * lambda, &penalty)?;
    let mut u = DenseMatrix::zeros(n, r);
    for l in 0..r {
        for i in 0..n {
            u.set(i, l, vec_u[l * n + i]);
        }
    }
    Ok(u)
}

/// Central-difference gradient estimate, entrywise.
pub fn finite_diff_grad(
    objective: &dyn Fn(&[f64]) -> f64,
    point: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(OracleError::InvalidArgument("step must be positive".into()));
    }
    let mut grad = Vec::with_capacity(point.len());
    let mut work = point.to_vec();
    for i in 0..point.len() {
        let orig = work[i];
        work[i] = orig + h;
        let up = objective(&work);
        work[i] = orig - h;
        let down = objective(&work);
        work[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Expected instant regret of a deterministic arm-per-user policy under
/// uniform user arrivals: `(1/d2) sum_u (max_a G[a,u] - G[policy[u],u])`.
pub fn exhaustive_regret(gamma_star: &DenseMatrix, policy: &[usize]) -> Result<f64> {
    let (d1, d2) = (gamma_star.rows(), gamma_star.cols());
    if policy.len() != d2 {
        return Err(OracleError::InvalidArgument(format!(
            "policy has {} entries for {} users",
            policy.len(),
            d2
        )));
    }
    let mut total = 0.0;
    for u in 0..d2 {
        if policy[u] >= d1 {
            return Err(OracleError::InvalidArgument(format!("arm {} out of range", policy[u])));
        }
        let best = (0..d1).map(|a| gamma_star.get(a, u)).fold(f64::NEG_INFINITY, f64::max);
        total += best - gamma_star.get(policy[u], u);
    }
    Ok(total / d2 as f64)
}

/// Controls for the coarse-to-fine factorized grid search.
#[derive(Debug, Clone)]
pub struct GridSearchSpec {
    /// Points per dimension in the coarse stage.
    pub coarse_points: usize,
    /// Refinement stops once the local step falls below this.
    pub target_step: f64,
    /// Starts kept from the coarse stage.
    pub starts: usize,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        GridSearchSpec { coarse_points: 5, target_step: 1e-3, starts: 8 }
    }
}

/// Grid-search minimum of the rank-2 factorized objective
/// `(1/2n) sum (y - (U V')[r,c])^2 + lambda_star (||U||_F^2 + ||V||_F^2)`
/// on a 2x2 problem: an 8-parameter coarse grid followed by compass-search
/// refinement from the best cells. Returns the best objective value found.
pub fn brute_force_factorized(
    cells: &[(usize, usize, f64)],
    dims: (usize, usize),
    lambda_star: f64,
    grid: &GridSearchSpec,
) -> Result<f64> {
    if dims != (2, 2) {
        return Err(OracleError::Guardrail(format!("dims {:?} must be exactly (2, 2)", dims)));
    }
    if cells.is_empty() {
        return Err(OracleError::InvalidArgument("no observed cells".into()));
    }
    if cells.iter().any(|&(r, c, _)| r >= 2 || c >= 2) {
        return Err(OracleError::InvalidArgument("cell index out of range".into()));
    }
    if grid.coarse_points < 2 {
        return Err(OracleError::InvalidArgument("need at least 2 coarse points".into()));
    }
    let n = cells.len() as f64;
    let objective = |p: &[f64]| -> f64 {
        // p[0..4] = U row-major, p[4..8] = V row-major
        let m00 = p[0] * p[4] + p[1] * p[5];
        let m01 = p[0] * p[6] + p[1] * p[7];
        let m10 = p[2] * p[4] + p[3] * p[5];
        let m11 = p[2] * p[6] + p[3] * p[7];
        let m = [[m00, m01], [m10, m11]];
        let mut loss = 0.0;
        for &(r, c, y) in cells {
            let d = y - m[r][c];
            loss += d * d;
        }
        let pen: f64 = p.iter().map(|v| v * v).sum();
        loss / (2.0 * n) + lambda_star * pen
    };

    // entry bound: at any optimum the penalty cannot exceed the value at zero
    let j0 = cells.iter().map(|&(_, _, y)| y * y).sum::<f64>() / (2.0 * n);
    let bound = if lambda_star > 0.0 {
        (j0 / lambda_star).sqrt().clamp(1.0, 1e3)
    } else {
        let ymax = cells.iter().fold(0.0f64, |a, &(_, _, y)| a.max(y.abs()));
        (ymax.sqrt() + 1.0).max(1.0)
    };

    let g = grid.coarse_points;
    let ticks: Vec<f64> = (0..g)
        .map(|i| -bound + 2.0 * bound * i as f64 / (g - 1) as f64)
        .collect();
    let mut best: Vec<(f64, [f64; 8])> = Vec::new();
    let mut point = [0.0f64; 8];
    let total = g.pow(8);
    for code in 0..total {
        let mut c = code;
        for slot in point.iter_mut() {
            *slot = ticks[c % g];
            c /= g;
        }
        let val = objective(&point);
        if best.len() < grid.starts {
            best.push((val, point));
            best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        } else if val < best.last().unwrap().0 {
            *best.last_mut().unwrap() = (val, point);
            best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        }
    }
    best.push((objective(&[0.0; 8]), [0.0; 8]));

    // data-driven starts: balanced SVD splits of the cell-mean matrix at
    // several shrinkage levels bracket the solution path
    let mut mean = DenseMatrix::zeros(2, 2);
    let mut cnt = DenseMatrix::zeros(2, 2);
    for &(r, c, y) in cells {
        mean.set(r, c, mean.get(r, c) + y);
        cnt.set(r, c, cnt.get(r, c) + 1.0);
    }
    for r in 0..2 {
        for c in 0..2 {
            if cnt.get(r, c) > 0.0 {
                mean.set(r, c, mean.get(r, c) / cnt.get(r, c));
            }
        }
    }
    let dec = numerics::svd(&mean)?;
    for shrink in [1.0, 0.8, 0.6, 0.4, 0.2, 0.05] {
        let mut start = [0.0f64; 8];
        for k in 0..2 {
            let s = (shrink * dec.singulars[k]).sqrt();
            start[k] = dec.left.get(0, k) * s;
            start[2 + k] = dec.left.get(1, k) * s;
            start[4 + k] = dec.right_t.get(k, 0) * s;
            start[6 + k] = dec.right_t.get(k, 1) * s;
        }
        best.push((objective(&start), start));
    }

    // refinement: the objective restricted to any single coordinate is an
    // exact quadratic, so three evaluations give the exact line minimizer;
    // cycle coordinates until moves fall below the target step
    let mut global = f64::INFINITY;
    for (_, start) in &best {
        let mut x = *start;
        let mut fx = objective(&x);
        for _ in 0..10_000 {
            let mut max_move = 0.0f64;
            for i in 0..8 {
                let orig = x[i];
                x[i] = orig + 1.0;
                let up = objective(&x);
                x[i] = orig - 1.0;
                let down = objective(&x);
                x[i] = orig;
                let curvature = up + down - 2.0 * fx;
                if curvature <= 1e-12 {
                    continue;
                }
                let slope = (up - down) / 2.0;
                let t = orig - slope / curvature;
                x[i] = t;
                let v = objective(&x);
                if v < fx {
                    fx = v;
                    max_move = max_move.max((t - orig).abs());
                } else {
                    x[i] = orig;
                }
            }
            if max_move < grid.target_step {
                break;
            }
        }
        if fx < global {
            global = fx;
        }
    }
    Ok(global)
}
