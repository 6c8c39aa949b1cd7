//! Basis-level extraction of the learned interaction: the d1 x d2 matrix of
//! estimated effects over all basis pairs, and the feature-level matrix
//! recovered through the basis Gramians.

use crate::kernels;
use crate::numerics::{self, DenseMatrix};
use crate::simdata::FixedBasisDesign;

use super::{DkrlModel, EstimatorError, Result};

/// Estimated effects at every (treatment basis, covariate basis) pair:
/// `gamma_hat = (G U) (H V)'` with cross-Grams `G`, `H` against the training
/// points. Rank is at most the model rank by construction.
pub fn extract_gamma(model: &DkrlModel, design: &FixedBasisDesign) -> Result<DenseMatrix> {
    if design.z_basis.rows() != model.train_z.cols() {
        return Err(EstimatorError::Dimension(format!(
            "treatment basis dimension {} vs training {}",
            design.z_basis.rows(),
            model.train_z.cols()
        )));
    }
    if design.x_basis.rows() != model.train_x.cols() {
        return Err(EstimatorError::Dimension(format!(
            "covariate basis dimension {} vs training {}",
            design.x_basis.rows(),
            model.train_x.cols()
        )));
    }
    let g = kernels::gram(&model.spec_g, &design.z_points(), &model.train_z)?.values;
    let h = kernels::gram(&model.spec_h, &design.x_points(), &model.train_x)?.values;
    Ok(g.matmul(&model.u).matmul(&h.matmul(&model.v).transpose()))
}

/// Feature-level interaction recovered from a basis-level estimate:
/// `theta_hat = (Z Z')^{-1} Z gamma_hat X' (X X')^{-1}`, computed via
/// symmetric solves. Requires nondegenerate basis Gramians.
pub fn extract_theta(gamma_hat: &DenseMatrix, design: &FixedBasisDesign) -> Result<DenseMatrix> {
    let (p, d1) = (design.z_basis.rows(), design.z_basis.cols());
    let (q, d2) = (design.x_basis.rows(), design.x_basis.cols());
    if gamma_hat.rows() != d1 || gamma_hat.cols() != d2 {
        return Err(EstimatorError::Dimension(format!(
            "gamma is {}x{} but bases give {}x{}",
            gamma_hat.rows(),
            gamma_hat.cols(),
            d1,
            d2
        )));
    }
    let zzt = design.z_basis.matmul(&design.z_basis.transpose());
    let xxt = design.x_basis.matmul(&design.x_basis.transpose());
    // A = Z gamma X' (p x q)
    let a = design.z_basis.matmul(gamma_hat).matmul(&design.x_basis.transpose());
    let left = numerics::solve_spd_matrix(&zzt, &a)
        .map_err(|_| EstimatorError::Degenerate { matrix: "ZZ'".into() })?;
    let theta_t = numerics::solve_spd_matrix(&xxt, &left.transpose())
        .map_err(|_| EstimatorError::Degenerate { matrix: "XX'".into() })?;
    let _ = (p, q);
    Ok(theta_t.transpose())
}
