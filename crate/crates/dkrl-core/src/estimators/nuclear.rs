//! Nuclear-norm penalized recovery of the basis-level interaction matrix by
//! proximal gradient on observed cells:
//!
//! ```text
//! J(G) = (1/2n) sum_i (y_i - G[r_i, c_i])^2 + lambda ||G||_*
//! G <- svt(G - step * grad_loss(G), step * lambda)
//! ```
//!
//! The convex counterpart of the factorized solver: at their optima the two
//! objective values coincide when the factorized penalty coefficient is
//! `lambda / 2` on `||U||_F^2 + ||V||_F^2`.

use crate::numerics::{self, DenseMatrix};

use super::{EstimatorError, NuclearConfig, Result};

#[derive(Debug, Clone)]
pub struct NuclearFit {
    pub gamma: DenseMatrix,
    /// Objective value at the zero start and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Smallest penalty at which the zero matrix is optimal:
/// the operator norm of the cell-sum matrix divided by n.
pub fn nuclear_lambda_max(cells: &[(usize, usize, f64)], dims: (usize, usize)) -> Result<f64> {
    let (sums, _, n) = aggregate(cells, dims)?;
    Ok(numerics::svd(&sums)?.singulars[0] / n as f64)
}

fn aggregate(
    cells: &[(usize, usize, f64)],
    dims: (usize, usize),
) -> Result<(DenseMatrix, DenseMatrix, usize)> {
    if cells.is_empty() {
        return Err(EstimatorError::InvalidConfig("no observed cells".into()));
    }
    let (d1, d2) = dims;
    let mut sums = DenseMatrix::zeros(d1, d2);
    let mut counts = DenseMatrix::zeros(d1, d2);
    for &(r, c, y) in cells {
        if r >= d1 || c >= d2 {
            return Err(EstimatorError::Dimension(format!(
                "cell ({}, {}) outside {}x{}",
                r, c, d1, d2
            )));
        }
        if !y.is_finite() {
            return Err(EstimatorError::Numeric("non-finite observation".into()));
        }
        sums.set(r, c, sums.get(r, c) + y);
        counts.set(r, c, counts.get(r, c) + 1.0);
    }
    Ok((sums, counts, cells.len()))
}

pub fn nuclear_fit(
    cells: &[(usize, usize, f64)],
    dims: (usize, usize),
    cfg: &NuclearConfig,
) -> Result<NuclearFit> {
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(EstimatorError::InvalidConfig("lambda must be >= 0".into()));
    }
    if cfg.max_iter == 0 {
        return Err(EstimatorError::InvalidConfig("max_iter must be >= 1".into()));
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(EstimatorError::InvalidConfig("tol must be > 0".into()));
    }
    let (sums, counts, n_obs) = aggregate(cells, dims)?;
    let n = n_obs as f64;
    let step = match cfg.step {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => {
            return Err(EstimatorError::InvalidConfig(format!("step {} must be > 0", s)))
        }
        // inverse Lipschitz constant of the gradient under one-hot sampling
        None => n / counts.max_abs(),
    };
    let ssq: f64 = cells.iter().map(|&(_, _, y)| y * y).sum();
    let loss = |g: &DenseMatrix| -> f64 {
        let mut acc = ssq;
        for r in 0..dims.0 {
            for c in 0..dims.1 {
                let v = g.get(r, c);
                acc += counts.get(r, c) * v * v - 2.0 * sums.get(r, c) * v;
            }
        }
        acc / (2.0 * n)
    };

    let mut gamma = DenseMatrix::zeros(dims.0, dims.1);
    let mut nuclear = 0.0;
    let mut objective = loss(&gamma) + cfg.lambda * nuclear;
    let mut trace = vec![objective];
    let mut iterations = cfg.max_iter;
    for t in 0..cfg.max_iter {
        // gradient of the quadratic loss: (counts .* G - sums) / n
        let mut moved = gamma.clone();
        for r in 0..dims.0 {
            for c in 0..dims.1 {
                let grad = (counts.get(r, c) * gamma.get(r, c) - sums.get(r, c)) / n;
                moved.set(r, c, gamma.get(r, c) - step * grad);
            }
        }
        let mut dec = numerics::svd(&moved)?;
        let tau = step * cfg.lambda;
        for s in dec.singulars.iter_mut() {
            *s = (*s - tau).max(0.0);
        }
        gamma = dec.reconstruct();
        nuclear = dec.singulars.iter().sum();
        let next = loss(&gamma) + cfg.lambda * nuclear;
        if !next.is_finite() {
            return Err(EstimatorError::Numeric(format!(
                "objective became non-finite at iteration {}",
                t + 1
            )));
        }
        let slack = 1e-9 * (1.0 + objective.abs());
        if next > objective + slack {
            return Err(EstimatorError::StepSize { iteration: t + 1, increase: next - objective });
        }
        let done = (objective - next).abs() <= cfg.tol * (1.0 + objective.abs());
        objective = next;
        trace.push(objective);
        if done {
            iterations = t + 1;
            break;
        }
    }
    Ok(NuclearFit { gamma, objective_trace: trace, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, GridSearchSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unpenalized_full_observation_is_exact() {
        let cells = vec![
            (0, 0, 1.0),
            (0, 1, -2.0),
            (1, 0, 0.5),
            (1, 1, 3.0),
        ];
        let cfg = NuclearConfig { lambda: 0.0, ..NuclearConfig::default() };
        let fit = nuclear_fit(&cells, (2, 2), &cfg).unwrap();
        for &(r, c, y) in &cells {
            assert!((fit.gamma.get(r, c) - y).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda_above_threshold_collapses_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cells: Vec<(usize, usize, f64)> = (0..30)
            .map(|_| (rng.gen_range(0..4), rng.gen_range(0..4), rng.gen_range(-1.0..1.0)))
            .collect();
        let lmax = nuclear_lambda_max(&cells, (4, 4)).unwrap();
        let cfg = NuclearConfig { lambda: lmax * 1.01, ..NuclearConfig::default() };
        let fit = nuclear_fit(&cells, (4, 4), &cfg).unwrap();
        assert!(fit.gamma.frobenius_norm() < 1e-12);
        // just below the threshold the solution moves away from zero
        let cfg = NuclearConfig { lambda: lmax * 0.9, ..NuclearConfig::default() };
        let fit = nuclear_fit(&cells, (4, 4), &cfg).unwrap();
        assert!(fit.gamma.frobenius_norm() > 1e-6);
    }

    #[test]
    fn objective_trace_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cells: Vec<(usize, usize, f64)> = (0..50)
            .map(|_| (rng.gen_range(0..5), rng.gen_range(0..6), rng.gen_range(-2.0..2.0)))
            .collect();
        let cfg = NuclearConfig { lambda: 0.05, ..NuclearConfig::default() };
        let fit = nuclear_fit(&cells, (5, 6), &cfg).unwrap();
        for t in 1..fit.objective_trace.len() {
            assert!(
                fit.objective_trace[t]
                    <= fit.objective_trace[t - 1] + 1e-9 * (1.0 + fit.objective_trace[0])
            );
        }
    }

    #[test]
    fn oversized_step_reports_divergence() {
        let cells = vec![(0, 0, 1.0), (0, 0, 1.2), (1, 1, -0.7)];
        let cfg = NuclearConfig {
            lambda: 1e-4,
            step: Some(1e3),
            max_iter: 50,
            ..NuclearConfig::default()
        };
        match nuclear_fit(&cells, (2, 2), &cfg) {
            Err(EstimatorError::StepSize { .. }) => {}
            other => panic!("expected step-size error, got {:?}", other.map(|f| f.iterations)),
        }
    }

    #[test]
    fn matches_brute_force_factorized_on_2x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..5 {
            let cells: Vec<(usize, usize, f64)> = (0..12)
                .map(|_| (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(-1.5..1.5)))
                .collect();
            let lambda = 0.08;
            let cfg = NuclearConfig { lambda, tol: 1e-12, max_iter: 5000, ..NuclearConfig::default() };
            let fit = nuclear_fit(&cells, (2, 2), &cfg).unwrap();
            let convex = *fit.objective_trace.last().unwrap();
            let brute = oracle::brute_force_factorized(
                &cells,
                (2, 2),
                lambda / 2.0,
                &GridSearchSpec::default(),
            )
            .unwrap();
            assert!(
                (convex - brute).abs() < 1e-3 * (1.0 + brute.abs()),
                "trial {trial}: convex {convex} vs brute {brute}"
            );
        }
    }
}
