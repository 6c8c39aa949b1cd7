//! Named desk-scale scenarios shared by the CLI and the test suites.

use serde::{Deserialize, Serialize};

use crate::bandit::{suggest_explore_rounds, EtcConfig};
use crate::estimators::{DkrlConfig, OutcomeConfig};
use crate::kernels::{median_lengthscale, KernelSpec};
use crate::numerics::DenseMatrix;
use crate::simdata::{
    self, DataError, FixedBasisDesign, NoiseSpec, SampleSet, ThetaSpec, ThetaVariant,
};

/// Everything needed to generate one synthetic dataset except the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub p: usize,
    pub q: usize,
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub theta: ThetaVariant,
    pub scale: f64,
    pub noise: NoiseSpec,
}

/// Data-generation presets by name.
///
/// - `upworthy`: headline-experiment scale; 50 treatments with 384-dim
///   embeddings, 500 users with 200-dim covariates, 500 observations.
/// - `planted-low-rank`: desk-scale benchmark instance.
pub fn gen_preset(name: &str) -> Option<GenSpec> {
    match name {
        "upworthy" => Some(GenSpec {
            p: 384,
            q: 200,
            d1: 50,
            d2: 500,
            n: 500,
            theta: ThetaVariant::LowRank { rank: 2 },
            scale: 1.0,
            noise: NoiseSpec::Gaussian { sigma: 0.1 },
        }),
        "planted-low-rank" => Some(GenSpec {
            p: 16,
            q: 16,
            d1: 20,
            d2: 20,
            n: 400,
            theta: ThetaVariant::LowRank { rank: 2 },
            scale: 1.0,
            noise: NoiseSpec::Gaussian { sigma: 0.02 },
        }),
        _ => None,
    }
}

/// Run the full generation pipeline: seeded design, ground-truth interaction
/// rescaled so the basis-level truth has max absolute entry `spec.scale`,
/// then uniform cell sampling. Returns the design with truth attached, the
/// rescaled theta, and the samples.
pub fn generate_dataset(
    spec: &GenSpec,
    seed: u64,
) -> Result<(FixedBasisDesign, DenseMatrix, SampleSet), DataError> {
    let mut design = simdata::gen_design(spec.p, spec.q, spec.d1, spec.d2, seed)?;
    let theta = simdata::gen_theta(&ThetaSpec {
        variant: spec.theta.clone(),
        dims: (spec.p, spec.q),
        scale: spec.scale,
        seed,
    })?;
    let theta = simdata::attach_truth(&mut design, &theta.matrix, spec.scale)?;
    let set = simdata::sample_dataset(&design, &theta, spec.n, &spec.noise, None, seed)?;
    Ok((design, theta, set))
}

/// Rank-2 design in which every arm is best for some users: treatments and
/// users sit on evenly spaced angles of the unit circle and the interaction
/// is the cosine of the angle gap. Committing to any single arm is as bad
/// as uniform play, so covariate-blind strategies pay linear regret.
pub fn heterogeneous_bandit_design(d1: usize, d2: usize) -> FixedBasisDesign {
    let z_basis = DenseMatrix::from_fn(2, d1, |i, a| {
        let angle = std::f64::consts::TAU * a as f64 / d1 as f64;
        if i == 0 {
            angle.cos()
        } else {
            angle.sin()
        }
    });
    let x_basis = DenseMatrix::from_fn(2, d2, |i, u| {
        let angle = std::f64::consts::TAU * u as f64 / d2 as f64;
        if i == 0 {
            angle.cos()
        } else {
            angle.sin()
        }
    });
    let gamma = z_basis.transpose().matmul(&x_basis);
    FixedBasisDesign {
        z_basis,
        x_basis,
        entry_bound: gamma.max_abs(),
        gamma_star: Some(gamma),
    }
}

/// Rank-1 design with a shared best arm: the interaction depends on the
/// treatment only, so even covariate-blind commitment is optimal.
pub fn homogeneous_bandit_design(d1: usize, d2: usize) -> FixedBasisDesign {
    let z_basis = DenseMatrix::from_fn(2, d1, |i, a| {
        let angle = std::f64::consts::FRAC_PI_2 * a as f64 / d1 as f64;
        if i == 0 {
            angle.cos()
        } else {
            angle.sin()
        }
    });
    // every user is the same point, so only the treatment matters
    let x_basis = DenseMatrix::from_fn(2, d2, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let theta = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let gamma = z_basis.transpose().matmul(&theta).matmul(&x_basis);
    FixedBasisDesign {
        z_basis,
        x_basis,
        entry_bound: gamma.max_abs(),
        gamma_star: Some(gamma),
    }
}

/// Bandit design presets by name.
pub fn bandit_design_preset(name: &str) -> Option<FixedBasisDesign> {
    match name {
        "heterogeneous" => Some(heterogeneous_bandit_design(10, 10)),
        "homogeneous" => Some(homogeneous_bandit_design(10, 10)),
        _ => None,
    }
}

/// Default explore-then-commit configuration for a design: theory-suggested
/// exploration length, median-heuristic gaussian kernels over the bases,
/// and a rank-2 estimator.
pub fn default_etc_config(design: &FixedBasisDesign, horizon: usize, seed: u64) -> EtcConfig {
    let rank = 2;
    EtcConfig {
        horizon,
        explore_rounds: suggest_explore_rounds(horizon, design.d1(), design.d2(), rank),
        seed,
        estimator: DkrlConfig {
            rank,
            lambda: 1e-5,
            max_iter: 80,
            tol: 1e-9,
            seed,
            ..DkrlConfig::default()
        },
        spec_g: KernelSpec::Gaussian { lengthscale: median_lengthscale(&design.z_points()) },
        spec_h: KernelSpec::Gaussian { lengthscale: median_lengthscale(&design.x_points()) },
        noise: NoiseSpec::Gaussian { sigma: 0.1 },
        outcome: OutcomeConfig::None,
    }
}
