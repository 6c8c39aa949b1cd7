//! Error taxonomy mapped onto process exit codes:
//! 0 success, 2 config error, 3 data error, 4 numeric failure.

use dkrl_core::bandit::BanditError;
use dkrl_core::baselines::BaselineError;
use dkrl_core::estimators::EstimatorError;
use dkrl_core::kernels::KernelError;
use dkrl_core::model_io::ModelIoError;
use dkrl_core::numerics::NumericsError;
use dkrl_core::simdata::DataError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<BanditError> for CliError {
    fn from(e: BanditError) -> Self {
        match e {
            BanditError::InvalidConfig(_) => CliError::Config(e.to_string()),
            BanditError::MissingTruth => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        CliError::Data(e.to_string())
    }
}
