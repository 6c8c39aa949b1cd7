//! Command configuration documents. All configs are JSON files; unknown
//! fields are rejected and every path is validated before any computation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dkrl_core::baselines::BaselineKind;
use dkrl_core::estimators::{DkrlConfig, OutcomeConfig};
use dkrl_core::kernels::{median_lengthscale, KernelSpec};
use dkrl_core::numerics::DenseMatrix;
use dkrl_core::presets::GenSpec;
use dkrl_core::simdata::NoiseSpec;

use crate::error::{CliError, Result};

pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))
}

/// Kernel spec whose gaussian lengthscale may be left out and resolved by
/// the median heuristic on the training points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpecConfig {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lengthscale: Option<f64>,
    },
    Linear,
}

impl KernelSpecConfig {
    pub fn resolve(&self, points: &DenseMatrix) -> KernelSpec {
        match self {
            KernelSpecConfig::Gaussian { lengthscale: Some(l) } => {
                KernelSpec::Gaussian { lengthscale: *l }
            }
            KernelSpecConfig::Gaussian { lengthscale: None } => {
                KernelSpec::Gaussian { lengthscale: median_lengthscale(points) }
            }
            KernelSpecConfig::Linear => KernelSpec::Linear,
        }
    }
}

impl Default for KernelSpecConfig {
    fn default() -> Self {
        KernelSpecConfig::Gaussian { lengthscale: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    /// Named preset; mutually exclusive with `spec`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GenSpec>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl GenConfig {
    pub fn resolve_spec(&self) -> Result<GenSpec> {
        match (&self.preset, &self.spec) {
            (Some(name), None) => dkrl_core::presets::gen_preset(name)
                .ok_or_else(|| CliError::Config(format!("unknown preset {:?}", name))),
            (None, Some(spec)) => Ok(spec.clone()),
            _ => Err(CliError::Config("give exactly one of `preset` or `spec`".into())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorChoice {
    Dkrl { config: DkrlConfig },
    Baseline { kind: BaselineKind, lambda: f64 },
}

fn one() -> usize {
    1
}

/// Outcome-model block whose kernel may omit the lengthscale; resolved
/// against the covariates it will be fit on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutcomeConfigDoc {
    None,
    KernelRidge {
        #[serde(default)]
        spec: KernelSpecConfig,
        lambda_m: f64,
        #[serde(default = "one")]
        folds: usize,
    },
}

impl Default for OutcomeConfigDoc {
    fn default() -> Self {
        OutcomeConfigDoc::None
    }
}

impl OutcomeConfigDoc {
    pub fn resolve(&self, covariates: &DenseMatrix) -> OutcomeConfig {
        match self {
            OutcomeConfigDoc::None => OutcomeConfig::None,
            OutcomeConfigDoc::KernelRidge { spec, lambda_m, folds } => {
                OutcomeConfig::KernelRidge {
                    spec: spec.resolve(covariates),
                    lambda_m: *lambda_m,
                    folds: *folds,
                }
            }
        }
    }
}

fn default_split() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Directory with `z.csv`, `x.csv`, `y.csv` (as written by `gen`).
    pub data_dir: PathBuf,
    #[serde(default)]
    pub spec_g: KernelSpecConfig,
    #[serde(default)]
    pub spec_h: KernelSpecConfig,
    pub estimator: EstimatorChoice,
    #[serde(default)]
    pub outcome: OutcomeConfigDoc,
    /// Train fraction of the seeded shuffle split.
    #[serde(default = "default_split")]
    pub split: f64,
    pub seed: u64,
    pub out_model: PathBuf,
    pub out_metrics: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub design: DesignSource,
    pub horizon: usize,
    /// Defaults to the theory-suggested length for the design and rank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_rounds: Option<usize>,
    pub estimator: DkrlConfig,
    #[serde(default)]
    pub spec_g: KernelSpecConfig,
    #[serde(default)]
    pub spec_h: KernelSpecConfig,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub outcome: OutcomeConfigDoc,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

fn default_bench_lambda() -> f64 {
    1e-4
}

fn default_bench_sigma() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Data-generation preset providing dims and sample size.
    pub preset: String,
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_split")]
    pub split: f64,
    /// Shared penalty level for both methods.
    #[serde(default = "default_bench_lambda")]
    pub lambda: f64,
    #[serde(default = "default_bench_sigma")]
    pub sigma: f64,
    pub out_dir: PathBuf,
}
