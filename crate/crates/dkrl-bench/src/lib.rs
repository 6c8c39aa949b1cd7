//! Shared instance builders for the criterion benchmarks.

use dkrl_core::kernels::{median_lengthscale, KernelSpec};
use dkrl_core::numerics::DenseMatrix;
use dkrl_core::presets::{self, GenSpec};
use dkrl_core::seeding;
use dkrl_core::simdata::{NoiseSpec, SampleSet, ThetaVariant};
use rand::Rng;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = seeding::rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Desk-scale planted dataset with its design and median-heuristic kernels.
pub fn planted_instance(
    rank: usize,
    seed: u64,
) -> (dkrl_core::FixedBasisDesign, SampleSet, KernelSpec, KernelSpec) {
    let spec = GenSpec {
        theta: ThetaVariant::LowRank { rank },
        noise: NoiseSpec::Gaussian { sigma: 0.02 },
        ..presets::gen_preset("planted-low-rank").unwrap()
    };
    let (design, _theta, set) = presets::generate_dataset(&spec, seed).unwrap();
    let spec_g = KernelSpec::Gaussian { lengthscale: median_lengthscale(&design.z_points()) };
    let spec_h = KernelSpec::Gaussian { lengthscale: median_lengthscale(&design.x_points()) };
    (design, set, spec_g, spec_h)
}
