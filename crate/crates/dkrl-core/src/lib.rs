//! Double kernel representation learning for heterogeneous treatment-effect
//! estimation, with its nuclear-norm convex counterpart, kernel ridge
//! baselines, synthetic low-rank/lq-ball data generation, and an
//! explore-then-commit adaptive-experimentation simulator.
//!
//! The crate is organized around the pipeline:
//!
//! ```text
//! simdata (designs, truths, samples)
//!    -> kernels (Gram matrices, KRR warmup / outcome model)
//!    -> estimators (residualize, alternating double-kernel fit,
//!                   nuclear-norm program, extraction, CV)
//!    -> baselines (product / single-input kernel regressions)
//!    -> bandit (explore-then-commit, regret accounting)
//! ```
//!
//! `numerics` supplies the shared dense linear algebra and `oracle` holds
//! independent brute-force references used to certify the solvers. All
//! randomness flows through seeded ChaCha streams (`seeding`), so every
//! result is reproducible bit-for-bit.

// lockstep indexing across several arrays reads better than zipped chains
// in the dense numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod bandit;
pub mod baselines;
pub mod estimators;
pub mod kernels;
pub mod model_io;
pub mod numerics;
pub mod oracle;
pub mod presets;
pub mod seeding;
pub mod simdata;

pub use bandit::{BanditTrace, EtcConfig};
pub use baselines::{BaselineKind, BaselineModel};
pub use estimators::{DkrlConfig, DkrlModel, NuclearConfig, OutcomeConfig};
pub use kernels::{GramMatrix, KernelSpec, KrrModel};
pub use model_io::ModelDocument;
pub use numerics::{DenseMatrix, SvdResult};
pub use simdata::{FixedBasisDesign, NoiseSpec, SampleIndices, ThetaSpec, ThetaVariant};
