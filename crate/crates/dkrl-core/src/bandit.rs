//! Explore-then-commit adaptive experimentation over a fixed basis design:
//! uniform exploration, a single interaction fit at the phase boundary, and
//! greedy per-user commitment, with exact regret accounting against the
//! attached truth.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    dkrl_fit_indexed, extract_gamma, DkrlConfig, EstimatorError, OutcomeConfig,
};
use crate::kernels::{self, KernelError, KernelSpec};
use crate::numerics::DenseMatrix;
use crate::seeding::{self, streams};
use crate::simdata::{FixedBasisDesign, NoiseSpec};

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("design carries no ground-truth interaction matrix")]
    MissingTruth,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("estimator failed at round {round}: {source}")]
    Estimator {
        round: usize,
        #[source]
        source: EstimatorError,
    },
    #[error("outcome model failed at round {round}: {source}")]
    Outcome {
        round: usize,
        #[source]
        source: KernelError,
    },
}

pub type Result<T> = std::result::Result<T, BanditError>;

/// Default constant in the exploration-length rule; the theory fixes only
/// the exponent.
pub const DEFAULT_KAPPA: f64 = 8.0;

/// Unclamped exploration length
/// `(T^2 d1 d2 log(d1+d2) r (d1+d2))^{1/3} / kappa`.
pub fn explore_rounds_unclamped(
    horizon: usize,
    d1: usize,
    d2: usize,
    rank: usize,
    kappa: f64,
) -> f64 {
    let t = horizon as f64;
    let d = (d1 + d2) as f64;
    (t * t * (d1 * d2) as f64 * d.ln() * rank as f64 * d).powf(1.0 / 3.0) / kappa
}

/// Theory-suggested exploration length, clamped to `[1, T/2]`.
pub fn suggest_explore_rounds(horizon: usize, d1: usize, d2: usize, rank: usize) -> usize {
    suggest_explore_rounds_with(horizon, d1, d2, rank, DEFAULT_KAPPA)
}

pub fn suggest_explore_rounds_with(
    horizon: usize,
    d1: usize,
    d2: usize,
    rank: usize,
    kappa: f64,
) -> usize {
    let raw = explore_rounds_unclamped(horizon, d1, d2, rank, kappa).ceil() as usize;
    raw.clamp(1, (horizon / 2).max(1))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtcConfig {
    pub horizon: usize,
    pub explore_rounds: usize,
    pub seed: u64,
    pub estimator: DkrlConfig,
    pub spec_g: KernelSpec,
    pub spec_h: KernelSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub outcome: OutcomeConfig,
}

impl EtcConfig {
    fn validate(&self) -> Result<()> {
        if self.explore_rounds == 0 || self.explore_rounds > self.horizon {
            return Err(BanditError::InvalidConfig(format!(
                "explore rounds {} outside [1, {}]",
                self.explore_rounds, self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRound {
    pub t: usize,
    pub arm: usize,
    pub user: usize,
    pub reward: f64,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BanditTrace {
    pub rounds: Vec<BanditRound>,
}

impl BanditTrace {
    fn push(&mut self, t: usize, arm: usize, user: usize, reward: f64, instant: f64) {
        let prev = self.rounds.last().map_or(0.0, |r| r.cumulative_regret);
        self.rounds.push(BanditRound {
            t,
            arm,
            user,
            reward,
            instant_regret: instant,
            cumulative_regret: prev + instant,
        });
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.cumulative_regret).collect()
    }

    /// CSV export: `t,arm,user,reward,instant_regret,cumulative_regret`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,arm,user,reward,instant_regret,cumulative_regret\n");
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t, r.arm, r.user, r.reward, r.instant_regret, r.cumulative_regret
            ));
        }
        out
    }
}

/// Greedy per-user policy from an estimated interaction matrix; argmax ties
/// break to the lowest arm index.
pub fn commit_policy(gamma_hat: &DenseMatrix) -> Vec<usize> {
    let (d1, d2) = (gamma_hat.rows(), gamma_hat.cols());
    (0..d2)
        .map(|u| {
            let mut best = 0usize;
            for a in 1..d1 {
                if gamma_hat.get(a, u) > gamma_hat.get(best, u) {
                    best = a;
                }
            }
            best
        })
        .collect()
}

struct CellData {
    arm_of: Vec<usize>,
    user_of: Vec<usize>,
    mean: Vec<f64>,
    count: Vec<f64>,
}

/// Group observations by (arm, user) cell: cell means with counts as
/// weights. The weighted fit on this grouping minimizes the same objective
/// as the raw samples.
fn group_cells(arms: &[usize], users: &[usize], y: &[f64]) -> CellData {
    let mut sum = std::collections::BTreeMap::<(usize, usize), (f64, f64)>::new();
    for i in 0..y.len() {
        let e = sum.entry((arms[i], users[i])).or_insert((0.0, 0.0));
        e.0 += y[i];
        e.1 += 1.0;
    }
    let mut cells = CellData {
        arm_of: Vec::with_capacity(sum.len()),
        user_of: Vec::with_capacity(sum.len()),
        mean: Vec::with_capacity(sum.len()),
        count: Vec::with_capacity(sum.len()),
    };
    for (&(a, u), &(s, c)) in &sum {
        cells.arm_of.push(a);
        cells.user_of.push(u);
        cells.mean.push(s / c);
        cells.count.push(c);
    }
    cells
}

/// Run explore-then-commit with the double-kernel estimator. Returns the
/// per-round trace and the estimated interaction matrix fit at the phase
/// boundary.
pub fn etc_run(design: &FixedBasisDesign, cfg: &EtcConfig) -> Result<(BanditTrace, DenseMatrix)> {
    cfg.validate()?;
    let gamma = design.gamma_star.as_ref().ok_or(BanditError::MissingTruth)?;
    let (d1, d2) = (design.d1(), design.d2());
    let best_value: Vec<f64> = (0..d2)
        .map(|u| (0..d1).map(|a| gamma.get(a, u)).fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let mut rng = seeding::stream_rng(cfg.seed, streams::BANDIT);
    let mut trace = BanditTrace::default();
    let mut arms = Vec::with_capacity(cfg.explore_rounds);
    let mut users = Vec::with_capacity(cfg.explore_rounds);
    let mut rewards = Vec::with_capacity(cfg.explore_rounds);
    for t in 1..=cfg.explore_rounds {
        let arm = rng.gen_range(0..d1);
        let user = rng.gen_range(0..d2);
        let eps = cfg.noise.sample(&mut rng);
        let reward = gamma.get(arm, user) + eps;
        arms.push(arm);
        users.push(user);
        rewards.push(reward);
        trace.push(t, arm, user, reward, best_value[user] - gamma.get(arm, user));
    }

    // residualize against the outcome model over distinct users, then fit
    // the interaction exactly once
    let fit_round = cfg.explore_rounds;
    let residuals = match &cfg.outcome {
        OutcomeConfig::None => rewards.clone(),
        OutcomeConfig::KernelRidge { spec, lambda_m, .. } => {
            let x_points = design.x_points();
            let mut user_sum = vec![0.0; d2];
            let mut user_count = vec![0.0; d2];
            for i in 0..rewards.len() {
                user_sum[users[i]] += rewards[i];
                user_count[users[i]] += 1.0;
            }
            let seen: Vec<usize> = (0..d2).filter(|&u| user_count[u] > 0.0).collect();
            let xm = x_points.select_rows(&seen);
            let ym: Vec<f64> = seen.iter().map(|&u| user_sum[u] / user_count[u]).collect();
            let wm: Vec<f64> = seen.iter().map(|&u| user_count[u]).collect();
            let m_hat = kernels::krr_fit_weighted(&xm, &ym, &wm, spec, *lambda_m)
                .map_err(|source| BanditError::Outcome { round: fit_round, source })?;
            let fitted = kernels::krr_predict(&m_hat, &x_points)
                .map_err(|source| BanditError::Outcome { round: fit_round, source })?;
            let mut res: Vec<f64> =
                (0..rewards.len()).map(|i| rewards[i] - fitted[users[i]]).collect();
            let mean = res.iter().sum::<f64>() / res.len() as f64;
            for r in res.iter_mut() {
                *r -= mean;
            }
            res
        }
    };
    let cells = group_cells(&arms, &users, &residuals);
    let model = dkrl_fit_indexed(
        &design.z_points(),
        &design.x_points(),
        &cells.arm_of,
        &cells.user_of,
        &cells.mean,
        &cells.count,
        &cfg.estimator,
        &cfg.spec_g,
        &cfg.spec_h,
    )
    .map_err(|source| BanditError::Estimator { round: fit_round, source })?;
    let gamma_hat = extract_gamma(&model, design)
        .map_err(|source| BanditError::Estimator { round: fit_round, source })?;
    let policy = commit_policy(&gamma_hat);

    for t in (cfg.explore_rounds + 1)..=cfg.horizon {
        let user = rng.gen_range(0..d2);
        let arm = policy[user];
        let eps = cfg.noise.sample(&mut rng);
        let reward = gamma.get(arm, user) + eps;
        trace.push(t, arm, user, reward, best_value[user] - gamma.get(arm, user));
    }
    Ok((trace, gamma_hat))
}

/// Ablation that ignores covariates: the exploration phase is identical,
/// but the estimator regresses rewards on treatment bases alone and commits
/// to a single arm for every user.
pub fn etc_treatment_only(design: &FixedBasisDesign, cfg: &EtcConfig) -> Result<BanditTrace> {
    cfg.validate()?;
    let gamma = design.gamma_star.as_ref().ok_or(BanditError::MissingTruth)?;
    let (d1, d2) = (design.d1(), design.d2());
    let best_value: Vec<f64> = (0..d2)
        .map(|u| (0..d1).map(|a| gamma.get(a, u)).fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let mut rng = seeding::stream_rng(cfg.seed, streams::BANDIT);
    let mut trace = BanditTrace::default();
    let mut arm_sum = vec![0.0; d1];
    let mut arm_count = vec![0.0; d1];
    for t in 1..=cfg.explore_rounds {
        let arm = rng.gen_range(0..d1);
        let user = rng.gen_range(0..d2);
        let eps = cfg.noise.sample(&mut rng);
        let reward = gamma.get(arm, user) + eps;
        arm_sum[arm] += reward;
        arm_count[arm] += 1.0;
        trace.push(t, arm, user, reward, best_value[user] - gamma.get(arm, user));
    }

    let z_points = design.z_points();
    let seen: Vec<usize> = (0..d1).filter(|&a| arm_count[a] > 0.0).collect();
    let zm = z_points.select_rows(&seen);
    let ym: Vec<f64> = seen.iter().map(|&a| arm_sum[a] / arm_count[a]).collect();
    let wm: Vec<f64> = seen.iter().map(|&a| arm_count[a]).collect();
    let lambda = cfg.estimator.lambda.max(1e-12);
    let model = kernels::krr_fit_weighted(&zm, &ym, &wm, &cfg.spec_g, lambda)
        .map_err(|source| BanditError::Outcome { round: cfg.explore_rounds, source })?;
    let values = kernels::krr_predict(&model, &z_points)
        .map_err(|source| BanditError::Outcome { round: cfg.explore_rounds, source })?;
    let mut committed = 0usize;
    for a in 1..d1 {
        if values[a] > values[committed] {
            committed = a;
        }
    }

    for t in (cfg.explore_rounds + 1)..=cfg.horizon {
        let user = rng.gen_range(0..d2);
        let eps = cfg.noise.sample(&mut rng);
        let reward = gamma.get(committed, user) + eps;
        trace.push(t, committed, user, reward, best_value[user] - gamma.get(committed, user));
    }
    Ok(trace)
}

/// Least-squares slope of `log(cumulative regret)` against `log(t)` over the
/// trailing `window` fraction of rounds. Returns 0 when the regret is zero
/// over the whole window.
pub fn regret_slope(trace: &BanditTrace, window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(BanditError::InvalidConfig(format!("window {} outside (0, 1]", window)));
    }
    let n = trace.rounds.len();
    if n == 0 {
        return Ok(0.0);
    }
    let start = n - ((window * n as f64).floor() as usize).clamp(1, n);
    let pts: Vec<(f64, f64)> = trace.rounds[start..]
        .iter()
        .filter(|r| r.cumulative_regret > 0.0)
        .map(|r| ((r.t as f64).ln(), r.cumulative_regret.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let m = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / sxx)
}
