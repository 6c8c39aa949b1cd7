//! Alternating double-kernel solver.
//!
//! Objective, with Grams `K_g`, `K_h` over the training points and factor
//! matrices `U`, `V` (n x r):
//!
//! ```text
//! L(U, V) = (1/2W) sum_k w_k (y_k - K_g[k,:] U V' K_h[k,:]')^2
//!           + lambda sum_l (U_l' K_g U_l + V_l' K_h V_l)
//! ```
//!
//! with unit weights (`W = n`) for the plain fit. Each factor update sweeps
//! the columns; a column update solves `(D_j^2 K + 2 W lambda I) u = D_j r`
//! exactly (`D_j` the diagonal of partner scores, `r` the partial residual),
//! so the objective never increases and the loss trace is nonincreasing.

use rand_distr::{Distribution, StandardNormal};

use crate::kernels::{self, KernelSpec, DEFAULT_JITTER};
use crate::numerics::{self, DenseMatrix, NumericsError};
use crate::seeding::{self, streams};

use super::{DkrlConfig, DkrlModel, EstimatorError, Result};

/// Fit with unit observation weights.
pub fn dkrl_fit(
    z: &DenseMatrix,
    x: &DenseMatrix,
    y: &[f64],
    cfg: &DkrlConfig,
    spec_g: &KernelSpec,
    spec_h: &KernelSpec,
) -> Result<DkrlModel> {
    fit_impl(z, x, y, None, cfg, spec_g, spec_h)
}

/// Fit on grouped observations: `weights[k]` repetitions of point pair `k`
/// with mean outcome `y[k]`. Minimizes the same objective as replicating
/// the rows, up to the constant within-group variance term.
pub fn dkrl_fit_weighted(
    z: &DenseMatrix,
    x: &DenseMatrix,
    y: &[f64],
    weights: &[f64],
    cfg: &DkrlConfig,
    spec_g: &KernelSpec,
    spec_h: &KernelSpec,
) -> Result<DkrlModel> {
    fit_impl(z, x, y, Some(weights), cfg, spec_g, spec_h)
}

fn fit_impl(
    z: &DenseMatrix,
    x: &DenseMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    cfg: &DkrlConfig,
    spec_g: &KernelSpec,
    spec_h: &KernelSpec,
) -> Result<DkrlModel> {
    let n = y.len();
    let identity: Vec<usize> = (0..n).collect();
    let unit = vec![1.0; n];
    dkrl_fit_indexed(
        z,
        x,
        &identity,
        &identity,
        y,
        weights.unwrap_or(&unit),
        cfg,
        spec_g,
        spec_h,
    )
}

/// Fit with factored indexing: `z_points` (du x p) and `x_points` (dv x q)
/// are the distinct point sets, and observation `k` pairs row `z_of[k]`
/// with row `x_of[k]`. The factor `u` gets one row per distinct treatment
/// and `v` one per distinct covariate; the objective and the fitted
/// function agree with the flat fit on the expanded samples.
#[allow(clippy::too_many_arguments)]
pub fn dkrl_fit_indexed(
    z_points: &DenseMatrix,
    x_points: &DenseMatrix,
    z_of: &[usize],
    x_of: &[usize],
    y: &[f64],
    weights: &[f64],
    cfg: &DkrlConfig,
    spec_g: &KernelSpec,
    spec_h: &KernelSpec,
) -> Result<DkrlModel> {
    cfg.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(EstimatorError::Dimension("empty training set".into()));
    }
    if z_of.len() != n || x_of.len() != n || weights.len() != n {
        return Err(EstimatorError::Dimension(format!(
            "observation arrays differ: z_of {}, x_of {}, y {}, w {}",
            z_of.len(),
            x_of.len(),
            n,
            weights.len()
        )));
    }
    let (du, dv) = (z_points.rows(), x_points.rows());
    if z_of.iter().any(|&i| i >= du) || x_of.iter().any(|&i| i >= dv) {
        return Err(EstimatorError::Dimension("observation index out of range".into()));
    }
    if weights.iter().any(|v| !v.is_finite() || *v < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(EstimatorError::InvalidConfig(
            "weights must be nonnegative with positive sum".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::Numeric("non-finite outcome".into()));
    }

    let gram_g = kernels::jitter(&kernels::gram_sym(spec_g, z_points)?, DEFAULT_JITTER)?;
    let gram_h = kernels::jitter(&kernels::gram_sym(spec_h, x_points)?, DEFAULT_JITTER)?;
    let prob = CellProblem {
        gram_g: &gram_g.values,
        gram_h: &gram_h.values,
        z_of,
        x_of,
        y,
        weights,
        total_weight: weights.iter().sum(),
        lambda: cfg.lambda,
    };

    let build = |u: DenseMatrix, v: DenseMatrix, trace: Vec<f64>, iters: usize| DkrlModel {
        u,
        v,
        gram_g: gram_g.clone(),
        gram_h: gram_h.clone(),
        train_z: z_points.clone(),
        train_x: x_points.clone(),
        spec_g: spec_g.clone(),
        spec_h: spec_h.clone(),
        lambda: cfg.lambda,
        loss_trace: trace,
        iterations_run: iters,
    };

    // zero-variance outcomes carry no interaction signal
    if y.iter().all(|v| *v == y[0]) && cfg.lambda > 0.0 {
        let u = DenseMatrix::zeros(du, cfg.rank);
        let v = DenseMatrix::zeros(dv, cfg.rank);
        let loss = prob.objective(&u, &v);
        return Ok(build(u, v, vec![loss], 1));
    }

    let init_scale = cfg.init_scale.unwrap_or(1.0 / (n as f64).sqrt());
    let mut rng_u = seeding::stream_rng(cfg.seed, streams::INIT_U);
    let mut rng_v = seeding::stream_rng(cfg.seed, streams::INIT_V);
    let mut u = DenseMatrix::from_fn(du, cfg.rank, |_, _| {
        init_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng_u)
    });
    let mut v = DenseMatrix::from_fn(dv, cfg.rank, |_, _| {
        init_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng_v)
    });

    let mut trace = vec![prob.objective(&u, &v)];
    let mut iterations = cfg.max_iter;
    for t in 0..cfg.max_iter {
        let u_prev = u.clone();
        let v_prev = v.clone();
        prob.step(&mut u, &v, Side::Treatment, cfg.inner_sweeps)?;
        prob.step(&mut v, &u, Side::Covariate, cfg.inner_sweeps)?;
        let loss = prob.objective(&u, &v);
        if !loss.is_finite() {
            return Err(EstimatorError::Numeric(format!(
                "loss became non-finite at iteration {}",
                t + 1
            )));
        }
        trace.push(loss);
        let du_change = rel_change(&u_prev, &u);
        let dv_change = rel_change(&v_prev, &v);
        if du_change < cfg.tol && dv_change < cfg.tol {
            iterations = t + 1;
            break;
        }
    }
    Ok(build(u, v, trace, iterations))
}

fn rel_change(before: &DenseMatrix, after: &DenseMatrix) -> f64 {
    let denom = before.frobenius_norm();
    let num = after.sub(before).frobenius_norm();
    if denom > 0.0 {
        num / denom
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// One U-step: `inner_sweeps` exact column updates of `u` with `v` fixed.
#[allow(clippy::too_many_arguments)]
pub fn u_step(
    u: &mut DenseMatrix,
    v: &DenseMatrix,
    gram_g: &DenseMatrix,
    gram_h: &DenseMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
    inner_sweeps: usize,
) -> Result<()> {
    let n = y.len();
    let identity: Vec<usize> = (0..n).collect();
    let unit = vec![1.0; n];
    let w = weights.unwrap_or(&unit);
    let prob = CellProblem {
        gram_g,
        gram_h,
        z_of: &identity,
        x_of: &identity,
        y,
        weights: w,
        total_weight: w.iter().sum(),
        lambda,
    };
    prob.step(u, v, Side::Treatment, inner_sweeps)
}

/// One V-step: the mirror of `u_step` with the roles of the Grams swapped.
#[allow(clippy::too_many_arguments)]
pub fn v_step(
    v: &mut DenseMatrix,
    u: &DenseMatrix,
    gram_g: &DenseMatrix,
    gram_h: &DenseMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
    inner_sweeps: usize,
) -> Result<()> {
    let n = y.len();
    let identity: Vec<usize> = (0..n).collect();
    let unit = vec![1.0; n];
    let w = weights.unwrap_or(&unit);
    let prob = CellProblem {
        gram_g,
        gram_h,
        z_of: &identity,
        x_of: &identity,
        y,
        weights: w,
        total_weight: w.iter().sum(),
        lambda,
    };
    prob.step(v, u, Side::Covariate, inner_sweeps)
}

#[derive(Clone, Copy)]
enum Side {
    Treatment,
    Covariate,
}

/// Observations referencing rows of the two Grams by index. The flat
/// problem is the identity-indexed special case.
struct CellProblem<'a> {
    gram_g: &'a DenseMatrix,
    gram_h: &'a DenseMatrix,
    z_of: &'a [usize],
    x_of: &'a [usize],
    y: &'a [f64],
    weights: &'a [f64],
    total_weight: f64,
    lambda: f64,
}

impl CellProblem<'_> {
    fn objective(&self, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
        let gu = self.gram_g.matmul(u);
        let hv = self.gram_h.matmul(v);
        let mut loss = 0.0;
        for k in 0..self.y.len() {
            let d = self.y[k] - numerics::dot(gu.row(self.z_of[k]), hv.row(self.x_of[k]));
            loss += self.weights[k] * d * d;
        }
        loss /= 2.0 * self.total_weight;
        let mut penalty = 0.0;
        for l in 0..u.cols() {
            penalty += numerics::dot(&u.column(l), &gu.column(l));
            penalty += numerics::dot(&v.column(l), &hv.column(l));
        }
        loss + self.lambda * penalty
    }

    /// Column-wise exact block-coordinate update of `target` holding
    /// `partner` fixed. Each column solves the aggregated system
    /// `(diag(sum_k w_k s_k^2) K + 2 W lambda I) col = sum_k w_k s_k r_k e_{i(k)}`,
    /// the normal equations premultiplied by the (jittered) Gram inverse.
    fn step(
        &self,
        target: &mut DenseMatrix,
        partner: &DenseMatrix,
        side: Side,
        inner_sweeps: usize,
    ) -> Result<()> {
        let (own_gram, partner_gram, own_of, partner_of) = match side {
            Side::Treatment => (self.gram_g, self.gram_h, self.z_of, self.x_of),
            Side::Covariate => (self.gram_h, self.gram_g, self.x_of, self.z_of),
        };
        let n = self.y.len();
        let d = own_gram.rows();
        let r = target.cols();
        // partner scores are fixed for the whole step
        let scores = partner_gram.matmul(partner);
        let mut own_scores = own_gram.matmul(target);
        let mut pred: Vec<f64> = (0..n)
            .map(|k| numerics::dot(own_scores.row(own_of[k]), scores.row(partner_of[k])))
            .collect();

        let shift = 2.0 * self.total_weight * self.lambda;
        let mut system = DenseMatrix::zeros(d, d);
        let mut agg_w = vec![0.0; d];
        let mut rhs = vec![0.0; d];
        for _ in 0..inner_sweeps {
            for j in 0..r {
                agg_w.iter_mut().for_each(|v| *v = 0.0);
                rhs.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..n {
                    let s = scores.get(partner_of[k], j);
                    let partial = self.y[k] - pred[k] + own_scores.get(own_of[k], j) * s;
                    let ws = self.weights[k] * s;
                    agg_w[own_of[k]] += ws * s;
                    rhs[own_of[k]] += ws * partial;
                }
                for i in 0..d {
                    let row = system.row_mut(i);
                    let gram_row = own_gram.row(i);
                    let wi = agg_w[i];
                    for c in 0..d {
                        row[c] = wi * gram_row[c];
                    }
                    row[i] += shift;
                }
                let col = numerics::lu_solve(&system, &rhs).map_err(|e| match e {
                    NumericsError::Singular(msg) => {
                        EstimatorError::Singular(format!("column {} update: {}", j, msg))
                    }
                    other => EstimatorError::Numerics(other),
                })?;
                let new_scores = own_gram.matvec(&col);
                for k in 0..n {
                    pred[k] += (new_scores[own_of[k]] - own_scores.get(own_of[k], j))
                        * scores.get(partner_of[k], j);
                }
                for (i, s) in new_scores.iter().enumerate() {
                    own_scores.set(i, j, *s);
                }
                target.set_column(j, &col);
            }
        }
        Ok(())
    }
}

/// Deduplicate exactly equal rows: returns the distinct rows and, for each
/// input row, the index of its representative. Useful for routing repeated
/// fixed-basis points through `dkrl_fit_indexed`.
pub fn dedup_rows(m: &DenseMatrix) -> (DenseMatrix, Vec<usize>) {
    let mut seen = std::collections::HashMap::<Vec<u64>, usize>::new();
    let mut keep: Vec<usize> = Vec::new();
    let mut map = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let key: Vec<u64> = m.row(i).iter().map(|v| v.to_bits()).collect();
        let idx = *seen.entry(key).or_insert_with(|| {
            keep.push(i);
            keep.len() - 1
        });
        map.push(idx);
    }
    (m.select_rows(&keep), map)
}

/// The double-kernel objective at `(u, v)`.
pub fn dkrl_objective(
    gram_g: &DenseMatrix,
    gram_h: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
) -> f64 {
    let n = y.len();
    let total_weight = weights.map_or(n as f64, |w| w.iter().sum());
    let gu = gram_g.matmul(u);
    let hv = gram_h.matmul(v);
    let mut loss = 0.0;
    for k in 0..n {
        let w = weights.map_or(1.0, |w| w[k]);
        let d = y[k] - numerics::dot(gu.row(k), hv.row(k));
        loss += w * d * d;
    }
    loss /= 2.0 * total_weight;
    let mut penalty = 0.0;
    for l in 0..u.cols() {
        penalty += numerics::dot(&u.column(l), &gu.column(l));
        penalty += numerics::dot(&v.column(l), &hv.column(l));
    }
    loss + lambda * penalty
}

/// Estimated effect at query pairs:
/// `gram(spec_g, z_i, train_z) U V' gram(spec_h, x_i, train_x)'`.
pub fn dkrl_predict(model: &DkrlModel, z: &DenseMatrix, x: &DenseMatrix) -> Result<Vec<f64>> {
    if z.rows() != x.rows() {
        return Err(EstimatorError::Dimension(format!(
            "query counts differ: {} treatments vs {} covariates",
            z.rows(),
            x.rows()
        )));
    }
    let g = kernels::gram(&model.spec_g, z, &model.train_z)?.values;
    let h = kernels::gram(&model.spec_h, x, &model.train_x)?.values;
    let a = g.matmul(&model.u);
    let b = h.matmul(&model.v);
    Ok((0..z.rows()).map(|i| numerics::dot(a.row(i), b.row(i))).collect())
}

/// Intrinsic-representation reparametrization `R = K_g U`, `S = K_h V`.
pub fn pmf_reparam(model: &DkrlModel) -> (DenseMatrix, DenseMatrix) {
    let r = model.gram_g.values.matmul(&model.u);
    let s = model.gram_h.values.matmul(&model.v);
    (r, s)
}

/// The reparametrized objective
/// `(1/2W) sum w_k (y_k - R_k . S_k)^2 + lambda sum_l (R_l' K_g^{-1} R_l + S_l' K_h^{-1} S_l)`.
/// Equals `dkrl_objective` at `(U, V)` when `R = K_g U`, `S = K_h V`.
pub fn pmf_objective(
    model: &DkrlModel,
    r: &DenseMatrix,
    s: &DenseMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<f64> {
    let n = y.len();
    if r.rows() != n || s.rows() != n {
        return Err(EstimatorError::Dimension("reparametrized factor rows".into()));
    }
    let total_weight = weights.map_or(n as f64, |w| w.iter().sum());
    let mut loss = 0.0;
    for k in 0..n {
        let w = weights.map_or(1.0, |w| w[k]);
        let d = y[k] - numerics::dot(r.row(k), s.row(k));
        loss += w * d * d;
    }
    loss /= 2.0 * total_weight;

    let lg = numerics::cholesky(&model.gram_g.values)
        .map_err(|_| EstimatorError::Singular("treatment Gram".into()))?;
    let lh = numerics::cholesky(&model.gram_h.values)
        .map_err(|_| EstimatorError::Singular("covariate Gram".into()))?;
    let mut penalty = 0.0;
    for l in 0..r.cols() {
        let rc = r.column(l);
        let sc = s.column(l);
        penalty += numerics::dot(&rc, &numerics::cholesky_solve(&lg, &rc));
        penalty += numerics::dot(&sc, &numerics::cholesky_solve(&lh, &sc));
    }
    Ok(loss + model.lambda * penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram_sym, jitter, GramMatrix};
    use crate::oracle;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn gauss() -> KernelSpec {
        KernelSpec::Gaussian { lengthscale: 1.0 }
    }

    /// Plant a rank-1 model y_k = (K_g u*)_k (K_h v*)_k on seeded points.
    fn planted_rank1(n: usize, seed: u64) -> (DenseMatrix, DenseMatrix, Vec<f64>) {
        let z = random_points(n, 2, seed);
        let x = random_points(n, 2, seed + 1);
        let kg = gram_sym(&gauss(), &z).unwrap().values;
        let kh = gram_sym(&gauss(), &x).unwrap().values;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let scale = 1.0 / (n as f64);
        let u_star: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let v_star: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let gu = kg.matvec(&u_star);
        let hv = kh.matvec(&v_star);
        let y: Vec<f64> = (0..n).map(|k| gu[k] * hv[k] * (n as f64)).collect();
        (z, x, y)
    }

    #[test]
    fn zero_target_shrinks_factors() {
        let n = 12;
        let z = random_points(n, 2, 1);
        let x = random_points(n, 2, 2);
        let kg = jitter(&gram_sym(&gauss(), &z).unwrap(), 1e-8).unwrap().values;
        let kh = jitter(&gram_sym(&gauss(), &x).unwrap(), 1e-8).unwrap().values;
        let y = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u = DenseMatrix::from_fn(n, 2, |_, _| rng.gen_range(-0.5..0.5));
        let mut v = DenseMatrix::from_fn(n, 2, |_, _| rng.gen_range(-0.5..0.5));
        let mut norms = vec![u.frobenius_norm()];
        let mut losses = vec![dkrl_objective(&kg, &kh, &u, &v, &y, None, 0.05)];
        for _ in 0..5 {
            u_step(&mut u, &v, &kg, &kh, &y, None, 0.05, 1).unwrap();
            v_step(&mut v, &u, &kg, &kh, &y, None, 0.05, 1).unwrap();
            norms.push(u.frobenius_norm());
            losses.push(dkrl_objective(&kg, &kh, &u, &v, &y, None, 0.05));
        }
        for t in 1..norms.len() {
            assert!(norms[t] <= norms[t - 1] + 1e-12, "norms {:?}", norms);
            assert!(losses[t] <= losses[t - 1] + 1e-12);
        }
    }

    #[test]
    fn planted_rank1_interpolates() {
        let (z, x, y) = planted_rank1(30, 10);
        let cfg = DkrlConfig {
            rank: 1,
            lambda: 1e-6,
            max_iter: 300,
            tol: 1e-10,
            ..DkrlConfig::default()
        };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let pred = dkrl_predict(&model, &z, &x).unwrap();
        let mse: f64 =
            pred.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
        assert!(mse < 1e-4, "train mse = {mse}");
    }

    #[test]
    fn planted_rank1_generalizes() {
        // same planted construction, held-out pairs predicted by the model
        let n = 40;
        let (z, x, y) = planted_rank1(n, 20);
        let train: Vec<usize> = (0..30).collect();
        let test: Vec<usize> = (30..40).collect();
        let cfg = DkrlConfig {
            rank: 1,
            lambda: 1e-6,
            max_iter: 300,
            tol: 1e-10,
            ..DkrlConfig::default()
        };
        let model = dkrl_fit(
            &z.select_rows(&train),
            &x.select_rows(&train),
            &train.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            &cfg,
            &gauss(),
            &gauss(),
        )
        .unwrap();
        let pred =
            dkrl_predict(&model, &z.select_rows(&test), &x.select_rows(&test)).unwrap();
        let mse: f64 = pred
            .iter()
            .zip(test.iter().map(|&i| y[i]))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / test.len() as f64;
        assert!(mse < 1e-3, "test mse = {mse}");
    }

    #[test]
    fn loss_trace_nonincreasing_seeded() {
        let z = random_points(25, 3, 30);
        let x = random_points(25, 3, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = DkrlConfig { rank: 3, lambda: 1e-3, max_iter: 40, ..DkrlConfig::default() };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let slack = 1e-9 * (1.0 + model.loss_trace[0]);
        for t in 1..model.loss_trace.len() {
            assert!(
                model.loss_trace[t] <= model.loss_trace[t - 1] + slack,
                "loss rose at {t}: {:?}",
                &model.loss_trace[t - 1..=t]
            );
        }
    }

    #[test]
    fn u_step_rank1_is_stationary() {
        let n = 10;
        let z = random_points(n, 2, 40);
        let x = random_points(n, 2, 41);
        let kg = jitter(&gram_sym(&gauss(), &z).unwrap(), 1e-8).unwrap().values;
        let kh = jitter(&gram_sym(&gauss(), &x).unwrap(), 1e-8).unwrap().values;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = DenseMatrix::from_fn(n, 1, |_, _| rng.gen_range(-0.5..0.5));
        let lambda = 0.01;

        let objective = |uvec: &[f64]| {
            let u = DenseMatrix::from_vec(n, 1, uvec.to_vec()).unwrap();
            dkrl_objective(&kg, &kh, &u, &v, &y, None, lambda)
        };
        let mut u = DenseMatrix::from_fn(n, 1, |_, _| rng.gen_range(-0.5..0.5));
        let init_grad = oracle::finite_diff_grad(&objective, &u.column(0), 1e-6).unwrap();
        let init_norm = init_grad.iter().map(|g| g * g).sum::<f64>().sqrt();

        u_step(&mut u, &v, &kg, &kh, &y, None, lambda, 1).unwrap();
        let grad = oracle::finite_diff_grad(&objective, &u.column(0), 1e-6).unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-4 * (1.0 + init_norm), "grad norm {norm} vs init {init_norm}");

        // and it matches the joint oracle solve at rank 1
        let u_oracle = oracle::exact_vec_solve_u(&kg, &kh, &y, &v, lambda).unwrap();
        assert!(u.sub(&u_oracle).frobenius_norm() < 1e-8);
    }

    #[test]
    fn huge_lambda_zeroes_columns() {
        let n = 8;
        let z = random_points(n, 2, 50);
        let x = random_points(n, 2, 51);
        let kg = jitter(&gram_sym(&gauss(), &z).unwrap(), 1e-8).unwrap().values;
        let kh = jitter(&gram_sym(&gauss(), &x).unwrap(), 1e-8).unwrap().values;
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = DenseMatrix::from_fn(n, 2, |_, _| rng.gen_range(-0.5..0.5));
        let mut u = DenseMatrix::from_fn(n, 2, |_, _| rng.gen_range(-0.5..0.5));
        u_step(&mut u, &v, &kg, &kh, &y, None, 1e9, 1).unwrap();
        assert!(u.frobenius_norm() < 1e-6, "norm = {}", u.frobenius_norm());
    }

    #[test]
    fn zero_partner_returns_penalty_minimizer() {
        let n = 6;
        let z = random_points(n, 2, 60);
        let kg = jitter(&gram_sym(&gauss(), &z).unwrap(), 1e-8).unwrap().values;
        let y: Vec<f64> = vec![1.0; n];
        let v = DenseMatrix::zeros(n, 2);
        let mut u = DenseMatrix::from_fn(n, 2, |i, j| (i + j) as f64 * 0.1 + 0.1);
        u_step(&mut u, &v, &kg, &kg, &y, None, 0.1, 1).unwrap();
        assert!(u.frobenius_norm() == 0.0 || u.frobenius_norm() < 1e-14);
    }

    #[test]
    fn predict_zero_factor_is_zero() {
        let (z, x, y) = planted_rank1(10, 70);
        let cfg = DkrlConfig { rank: 2, max_iter: 2, ..DkrlConfig::default() };
        let mut model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        model.u = DenseMatrix::zeros(10, 2);
        let pred = dkrl_predict(&model, &z, &x).unwrap();
        assert!(pred.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn predict_at_training_pair_matches_formula() {
        let (z, x, y) = planted_rank1(12, 80);
        let cfg = DkrlConfig { rank: 2, max_iter: 10, ..DkrlConfig::default() };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let pred = dkrl_predict(&model, &z, &x).unwrap();
        // explicit kernel-row formula, unjittered cross-Gram rows
        let kg = gram_sym(&gauss(), &z).unwrap().values;
        let kh = gram_sym(&gauss(), &x).unwrap().values;
        let uvt = model.u.matmul(&model.v.transpose());
        for k in 0..12 {
            let mut expect = 0.0;
            for i in 0..12 {
                for j in 0..12 {
                    expect += kg.get(k, i) * uvt.get(i, j) * kh.get(k, j);
                }
            }
            assert!((pred[k] - expect).abs() < 1e-12, "pair {k}");
        }
    }

    #[test]
    fn representer_linearity_at_random_queries() {
        let (z, x, y) = planted_rank1(10, 90);
        let cfg = DkrlConfig { rank: 2, max_iter: 5, ..DkrlConfig::default() };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let zq = random_points(5, 2, 91);
        let xq = random_points(5, 2, 92);
        let pred = dkrl_predict(&model, &zq, &xq).unwrap();
        for i in 0..5 {
            let mut expect = 0.0;
            for a in 0..10 {
                for b in 0..10 {
                    let kg = gauss().eval(zq.row(i), model.train_z.row(a));
                    let kh = gauss().eval(xq.row(i), model.train_x.row(b));
                    expect += kg * model.u.row(a).iter().zip(model.v.row(b)).map(|(u, v)| u * v).sum::<f64>() * kh;
                }
            }
            assert!((pred[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pmf_reparam_cases() {
        let (z, x, y) = planted_rank1(8, 100);
        let cfg = DkrlConfig { rank: 2, max_iter: 5, ..DkrlConfig::default() };
        let mut model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();

        let zeroed = DkrlModel { u: DenseMatrix::zeros(8, 2), ..model.clone() };
        let (r, _) = pmf_reparam(&zeroed);
        assert!(r.frobenius_norm() == 0.0);

        // identity Gram: R must equal U
        model.gram_g = GramMatrix {
            values: DenseMatrix::identity(8),
            spec: KernelSpec::Linear,
            symmetric: true,
        };
        let (r, _) = pmf_reparam(&model);
        assert!(r.sub(&model.u).frobenius_norm() < 1e-15);
    }

    #[test]
    fn pmf_objective_identity_at_fit() {
        let z = random_points(15, 2, 110);
        let x = random_points(15, 2, 111);
        let mut rng = ChaCha8Rng::seed_from_u64(112);
        let y: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = DkrlConfig { rank: 2, lambda: 0.01, max_iter: 30, ..DkrlConfig::default() };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let original = dkrl_objective(
            &model.gram_g.values,
            &model.gram_h.values,
            &model.u,
            &model.v,
            &y,
            None,
            model.lambda,
        );
        let (r, s) = pmf_reparam(&model);
        let reparam = pmf_objective(&model, &r, &s, &y, None).unwrap();
        assert!(
            (original - reparam).abs() < 1e-9 * (1.0 + original.abs()),
            "{original} vs {reparam}"
        );
    }

    #[test]
    fn zero_variance_outcomes_short_circuit() {
        let z = random_points(9, 2, 120);
        let x = random_points(9, 2, 121);
        let y = vec![3.5; 9];
        let cfg = DkrlConfig::default();
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        assert_eq!(model.iterations_run, 1);
        assert_eq!(model.loss_trace.len(), 1);
        assert!(model.u.frobenius_norm() == 0.0 && model.v.frobenius_norm() == 0.0);
    }

    #[test]
    fn weighted_fit_matches_replicated_fit_objective() {
        // grouping duplicated pairs must give the same function-space problem
        let z = random_points(6, 2, 130);
        let x = random_points(6, 2, 131);
        let mut rng = ChaCha8Rng::seed_from_u64(132);
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // replicate pair 0 three times and pair 1 twice
        let reps = [3usize, 2, 1, 1, 1, 1];
        let mut idx = Vec::new();
        for (i, &r) in reps.iter().enumerate() {
            for _ in 0..r {
                idx.push(i);
            }
        }
        let zr = z.select_rows(&idx);
        let xr = x.select_rows(&idx);
        let yr: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let cfg = DkrlConfig {
            rank: 1,
            lambda: 0.05,
            max_iter: 200,
            tol: 1e-12,
            ..DkrlConfig::default()
        };
        let weights: Vec<f64> = reps.iter().map(|&r| r as f64).collect();
        let grouped = dkrl_fit_weighted(&z, &x, &y, &weights, &cfg, &gauss(), &gauss()).unwrap();
        let replicated = dkrl_fit(&zr, &xr, &yr, &cfg, &gauss(), &gauss()).unwrap();
        // compare converged objectives on the replicated representation
        let pred_g = dkrl_predict(&grouped, &zr, &xr).unwrap();
        let pred_r = dkrl_predict(&replicated, &zr, &xr).unwrap();
        let obj = |pred: &[f64], model: &DkrlModel, u: &DenseMatrix, v: &DenseMatrix| {
            let loss: f64 =
                pred.iter().zip(&yr).map(|(p, t)| (t - p) * (t - p)).sum::<f64>()
                    / (2.0 * yr.len() as f64);
            let gu = model.gram_g.values.matmul(u);
            let hv = model.gram_h.values.matmul(v);
            let mut pen = 0.0;
            for l in 0..u.cols() {
                pen += numerics::dot(&u.column(l), &gu.column(l));
                pen += numerics::dot(&v.column(l), &hv.column(l));
            }
            loss + cfg.lambda * pen
        };
        let o_g = obj(&pred_g, &grouped, &grouped.u, &grouped.v);
        let o_r = obj(&pred_r, &replicated, &replicated.u, &replicated.v);
        assert!(
            (o_g - o_r).abs() < 1e-6 * (1.0 + o_r.abs()),
            "grouped {o_g} vs replicated {o_r}"
        );
    }

    #[test]
    fn linear_kernel_fit_matches_feature_space_program() {
        // with linear kernels and full-column-rank features, the
        // Gram-parametrized program and the feature-space factorized program
        // reach the same objective value
        let n = 24;
        let (p, q, r) = (3usize, 3usize, 2usize);
        let z = random_points(n, p, 160);
        let x = random_points(n, q, 161);
        let mut rng = ChaCha8Rng::seed_from_u64(162);
        let u_true = DenseMatrix::from_fn(p, 1, |_, _| rng.gen_range(-1.0..1.0));
        let v_true = DenseMatrix::from_fn(q, 1, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n)
            .map(|k| {
                numerics::dot(z.row(k), &u_true.column(0))
                    * numerics::dot(x.row(k), &v_true.column(0))
                    + 0.05 * rng.gen_range(-1.0..1.0)
            })
            .collect();
        let lambda = 1e-3;
        let cfg = DkrlConfig {
            rank: r,
            lambda,
            max_iter: 500,
            tol: 1e-12,
            seed: 163,
            ..DkrlConfig::default()
        };
        let model =
            dkrl_fit(&z, &x, &y, &cfg, &KernelSpec::Linear, &KernelSpec::Linear).unwrap();
        let j_gram = *model.loss_trace.last().unwrap();

        // feature-space alternation: columns of U* (p x r) and V* (q x r)
        // solve small ridge systems against the raw features
        let mut fu = DenseMatrix::from_fn(p, r, |_, _| 0.3 * rng.gen_range(-1.0..1.0));
        let mut fv = DenseMatrix::from_fn(q, r, |_, _| 0.3 * rng.gen_range(-1.0..1.0));
        let feat_objective = |fu: &DenseMatrix, fv: &DenseMatrix| {
            let zu = z.matmul(fu);
            let xv = x.matmul(fv);
            let loss: f64 = (0..n)
                .map(|k| {
                    let d = y[k] - numerics::dot(zu.row(k), xv.row(k));
                    d * d
                })
                .sum::<f64>()
                / (2.0 * n as f64);
            loss + lambda
                * (fu.frobenius_norm().powi(2) + fv.frobenius_norm().powi(2))
        };
        fn feat_sweep(
            target: &mut DenseMatrix,
            own_feats: &DenseMatrix,
            partner: &DenseMatrix,
            partner_feats: &DenseMatrix,
            y: &[f64],
            lambda: f64,
        ) {
            let n = y.len();
            let partner_scores = partner_feats.matmul(partner);
            let own_scores = own_feats.matmul(target);
            let mut pred: Vec<f64> = (0..n)
                .map(|k| numerics::dot(own_scores.row(k), partner_scores.row(k)))
                .collect();
            for j in 0..target.cols() {
                let design = DenseMatrix::from_fn(n, own_feats.cols(), |k, i| {
                    partner_scores.get(k, j) * own_feats.get(k, i)
                });
                let resid: Vec<f64> = (0..n)
                    .map(|k| {
                        y[k] - pred[k]
                            + numerics::dot(own_feats.row(k), &target.column(j))
                                * partner_scores.get(k, j)
                    })
                    .collect();
                let col = numerics::ridge_solve(
                    &design,
                    &resid,
                    2.0 * n as f64 * lambda,
                    &DenseMatrix::identity(own_feats.cols()),
                )
                .unwrap();
                let new_scores = own_feats.matvec(&col);
                for k in 0..n {
                    pred[k] += (new_scores[k]
                        - numerics::dot(own_feats.row(k), &target.column(j)))
                        * partner_scores.get(k, j);
                }
                target.set_column(j, &col);
            }
        }
        for _ in 0..500 {
            feat_sweep(&mut fu, &z, &fv, &x, &y, lambda);
            feat_sweep(&mut fv, &x, &fu, &z, &y, lambda);
        }
        let j_feat = feat_objective(&fu, &fv);
        assert!(
            (j_gram - j_feat).abs() < 1e-3 * (1.0 + j_feat.abs()),
            "gram objective {j_gram} vs feature objective {j_feat}"
        );
    }

    #[test]
    fn dedup_rows_maps_back() {
        let m = DenseMatrix::from_vec(4, 2, vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 5.0, 6.0]).unwrap();
        let (distinct, map) = dedup_rows(&m);
        assert_eq!(distinct.rows(), 3);
        assert_eq!(map, vec![0, 1, 0, 2]);
        for i in 0..4 {
            assert_eq!(m.row(i), distinct.row(map[i]));
        }
    }

    #[test]
    fn indexed_fit_matches_flat_fit_objective() {
        // duplicated basis points: the factored-index fit must reach the
        // same function-space objective as the flat fit on expanded rows
        let basis_z = random_points(4, 2, 150);
        let basis_x = random_points(5, 2, 151);
        let mut rng = ChaCha8Rng::seed_from_u64(152);
        let n = 40;
        let z_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let x_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z_flat = basis_z.select_rows(&z_of);
        let x_flat = basis_x.select_rows(&x_of);
        let cfg = DkrlConfig {
            rank: 2,
            lambda: 0.01,
            max_iter: 400,
            tol: 1e-12,
            ..DkrlConfig::default()
        };
        let unit = vec![1.0; n];
        let indexed = dkrl_fit_indexed(
            &basis_z, &basis_x, &z_of, &x_of, &y, &unit, &cfg, &gauss(), &gauss(),
        )
        .unwrap();
        let flat = dkrl_fit(&z_flat, &x_flat, &y, &cfg, &gauss(), &gauss()).unwrap();
        // compare converged objectives evaluated on the flat representation
        let pred_i = dkrl_predict(&indexed, &z_flat, &x_flat).unwrap();
        let pred_f = dkrl_predict(&flat, &z_flat, &x_flat).unwrap();
        let obj = |pred: &[f64], model: &DkrlModel| {
            let loss: f64 = pred.iter().zip(&y).map(|(p, t)| (t - p) * (t - p)).sum::<f64>()
                / (2.0 * n as f64);
            let gu = model.gram_g.values.matmul(&model.u);
            let hv = model.gram_h.values.matmul(&model.v);
            let mut pen = 0.0;
            for l in 0..model.u.cols() {
                pen += numerics::dot(&model.u.column(l), &gu.column(l));
                pen += numerics::dot(&model.v.column(l), &hv.column(l));
            }
            loss + cfg.lambda * pen
        };
        let o_i = obj(&pred_i, &indexed);
        let o_f = obj(&pred_f, &flat);
        assert!((o_i - o_f).abs() < 1e-5 * (1.0 + o_f.abs()), "indexed {o_i} vs flat {o_f}");
        assert_eq!(indexed.u.rows(), 4);
        assert_eq!(indexed.v.rows(), 5);
    }

    #[test]
    fn trim_drops_dead_columns() {
        let (z, x, y) = planted_rank1(14, 140);
        let cfg = DkrlConfig {
            rank: 4,
            lambda: 1e-5,
            max_iter: 150,
            tol: 1e-10,
            ..DkrlConfig::default()
        };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let trimmed = model.trimmed();
        assert!(trimmed.rank() <= model.rank());
        // predictions barely move
        let a = dkrl_predict(&model, &z, &x).unwrap();
        let b = dkrl_predict(&trimmed, &z, &x).unwrap();
        let diff: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff <= 0.05 * (1.0 + scale), "max diff {diff}");
    }
}
