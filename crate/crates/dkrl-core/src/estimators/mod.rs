//! Treatment-effect estimators: residualization, the alternating
//! double-kernel solver, its nuclear-norm convex counterpart, basis-level
//! extraction of the learned interaction, and cross-validation.

mod cv;
mod dkrl;
mod extract;
mod nuclear;
mod residual;

pub use cv::{cross_validate, CvEntry, CvReport};
pub use dkrl::{
    dedup_rows, dkrl_fit, dkrl_fit_indexed, dkrl_fit_weighted, dkrl_objective, dkrl_predict,
    pmf_objective, pmf_reparam, u_step, v_step,
};
pub use extract::{extract_gamma, extract_theta};
pub use nuclear::{nuclear_fit, nuclear_lambda_max, NuclearFit};
pub use residual::residualize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{GramMatrix, KernelError, KernelSpec};
use crate::numerics::{DenseMatrix, NumericsError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("singular system in {0}")]
    Singular(String),
    #[error("degenerate basis: {matrix} is singular")]
    Degenerate { matrix: String },
    #[error("objective increased by {increase:.3e} at iteration {iteration}; reduce the step size")]
    StepSize { iteration: usize, increase: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

fn default_inner_sweeps() -> usize {
    1
}

/// Configuration of the alternating double-kernel solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DkrlConfig {
    pub rank: usize,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default = "default_inner_sweeps")]
    pub inner_sweeps: usize,
    /// Std dev of the Gaussian factor initialization; `None` means `1/sqrt(n)`.
    #[serde(default)]
    pub init_scale: Option<f64>,
    pub seed: u64,
}

impl Default for DkrlConfig {
    fn default() -> Self {
        DkrlConfig {
            rank: 2,
            lambda: 1e-3,
            max_iter: 100,
            tol: 1e-8,
            inner_sweeps: 1,
            init_scale: None,
            seed: 0,
        }
    }
}

impl DkrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(EstimatorError::InvalidConfig("rank must be >= 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(EstimatorError::InvalidConfig("lambda must be >= 0".into()));
        }
        if self.max_iter == 0 {
            return Err(EstimatorError::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(EstimatorError::InvalidConfig("tol must be > 0".into()));
        }
        if self.inner_sweeps == 0 {
            return Err(EstimatorError::InvalidConfig("inner_sweeps must be >= 1".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(EstimatorError::InvalidConfig("init_scale must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// How the outcome model is handled before the interaction fit.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OutcomeConfig {
    /// Use the outcomes as given (already centered).
    #[default]
    None,
    /// Subtract a kernel-ridge fit of `E[y|x]`; `folds > 1` cross-fits.
    KernelRidge {
        spec: KernelSpec,
        lambda_m: f64,
        #[serde(default = "default_inner_sweeps")]
        folds: usize,
    },
}

/// Configuration of the nuclear-norm proximal-gradient program.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuclearConfig {
    /// Coefficient of the nuclear norm in the objective.
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Gradient step; `None` picks `n / max cell multiplicity`, the inverse
    /// Lipschitz constant under one-hot sampling.
    #[serde(default)]
    pub step: Option<f64>,
}

impl Default for NuclearConfig {
    fn default() -> Self {
        NuclearConfig { lambda: 1e-3, max_iter: 500, tol: 1e-10, step: None }
    }
}

/// Fitted double-kernel model: factor matrices over the training points plus
/// everything needed to evaluate the estimated effect at new pairs.
#[derive(Debug, Clone)]
pub struct DkrlModel {
    /// n x r treatment-side factor.
    pub u: DenseMatrix,
    /// n x r covariate-side factor.
    pub v: DenseMatrix,
    /// Jittered training Gram over treatments, as used by the fit.
    pub gram_g: GramMatrix,
    /// Jittered training Gram over covariates.
    pub gram_h: GramMatrix,
    pub train_z: DenseMatrix,
    pub train_x: DenseMatrix,
    pub spec_g: KernelSpec,
    pub spec_h: KernelSpec,
    pub lambda: f64,
    /// Objective value at initialization and after every outer iteration;
    /// nonincreasing by construction.
    pub loss_trace: Vec<f64>,
    pub iterations_run: usize,
}

impl DkrlModel {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn train_size(&self) -> usize {
        self.u.rows()
    }

    /// Drop factor columns whose contribution `||K_g U_l|| * ||K_h V_l||`
    /// falls below 1e-3 of the largest column's.
    pub fn trimmed(&self) -> DkrlModel {
        let r = self.rank();
        let ku = self.gram_g.values.matmul(&self.u);
        let kv = self.gram_h.values.matmul(&self.v);
        let contrib: Vec<f64> = (0..r)
            .map(|l| {
                let nu: f64 = ku.column(l).iter().map(|v| v * v).sum::<f64>().sqrt();
                let nv: f64 = kv.column(l).iter().map(|v| v * v).sum::<f64>().sqrt();
                nu * nv
            })
            .collect();
        let max = contrib.iter().cloned().fold(0.0f64, f64::max);
        let keep: Vec<usize> = (0..r).filter(|&l| contrib[l] >= 1e-3 * max).collect();
        if keep.len() == r {
            return self.clone();
        }
        // factored-index fits may hold different row counts per side
        let mut u = DenseMatrix::zeros(self.u.rows(), keep.len());
        let mut v = DenseMatrix::zeros(self.v.rows(), keep.len());
        for (new_l, &l) in keep.iter().enumerate() {
            u.set_column(new_l, &self.u.column(l));
            v.set_column(new_l, &self.v.column(l));
        }
        DkrlModel { u, v, ..self.clone() }
    }
}
