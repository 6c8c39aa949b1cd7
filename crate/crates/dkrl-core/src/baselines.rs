//! Comparison estimators: product-kernel regression over treatment and
//! covariate Grams, and single-input kernel regressions (treatment-only,
//! covariate-only, concatenated).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{self, KernelError, KernelSpec, KrrModel};
use crate::numerics::{self, DenseMatrix, NumericsError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    ProdKernel,
    ZOnly,
    XOnly,
    ZxConcat,
}

/// A fitted baseline. `ProdKernel` keeps both point sets and takes the
/// entrywise product of the two Grams; the others reduce to plain KRR.
#[derive(Debug, Clone)]
pub enum BaselineModel {
    ProdKernel {
        train_z: DenseMatrix,
        train_x: DenseMatrix,
        spec_g: KernelSpec,
        spec_h: KernelSpec,
        weights: Vec<f64>,
        lambda: f64,
    },
    ZOnly(KrrModel),
    XOnly(KrrModel),
    ZxConcat {
        model: KrrModel,
        /// Block scales fixed at fit time: each block is divided by its
        /// average training norm before concatenation.
        z_scale: f64,
        x_scale: f64,
        z_dim: usize,
    },
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::ProdKernel { .. } => BaselineKind::ProdKernel,
            BaselineModel::ZOnly(_) => BaselineKind::ZOnly,
            BaselineModel::XOnly(_) => BaselineKind::XOnly,
            BaselineModel::ZxConcat { .. } => BaselineKind::ZxConcat,
        }
    }
}

/// Fit a baseline under the shared `(K + n*lambda*I) alpha = y` convention.
/// `zx_concat` applies `spec_g` to the concatenated standardized vector.
pub fn baseline_fit(
    z: &DenseMatrix,
    x: &DenseMatrix,
    y: &[f64],
    kind: BaselineKind,
    spec_g: &KernelSpec,
    spec_h: &KernelSpec,
    lambda: f64,
) -> Result<BaselineModel> {
    let n = z.rows();
    if x.rows() != n || y.len() != n {
        return Err(BaselineError::Dimension(format!(
            "sample counts differ: z {}, x {}, y {}",
            n,
            x.rows(),
            y.len()
        )));
    }
    match kind {
        BaselineKind::ProdKernel => {
            let kg = kernels::gram_sym(spec_g, z)?.values;
            let kh = kernels::gram_sym(spec_h, x)?.values;
            let mut k = DenseMatrix::from_fn(n, n, |i, j| kg.get(i, j) * kh.get(i, j));
            let shift = n as f64 * lambda;
            for i in 0..n {
                k.set(i, i, k.get(i, i) + shift);
            }
            let weights = numerics::solve_spd(&k, y)?;
            Ok(BaselineModel::ProdKernel {
                train_z: z.clone(),
                train_x: x.clone(),
                spec_g: spec_g.clone(),
                spec_h: spec_h.clone(),
                weights,
                lambda,
            })
        }
        BaselineKind::ZOnly => Ok(BaselineModel::ZOnly(kernels::krr_fit(z, y, spec_g, lambda)?)),
        BaselineKind::XOnly => Ok(BaselineModel::XOnly(kernels::krr_fit(x, y, spec_h, lambda)?)),
        BaselineKind::ZxConcat => {
            let z_scale = mean_row_norm(z);
            let x_scale = mean_row_norm(x);
            let concat = concat_scaled(z, x, z_scale, x_scale);
            let model = kernels::krr_fit(&concat, y, spec_g, lambda)?;
            Ok(BaselineModel::ZxConcat { model, z_scale, x_scale, z_dim: z.cols() })
        }
    }
}

pub fn baseline_predict(
    model: &BaselineModel,
    z: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<Vec<f64>> {
    if z.rows() != x.rows() {
        return Err(BaselineError::Dimension("query counts differ".into()));
    }
    match model {
        BaselineModel::ProdKernel { train_z, train_x, spec_g, spec_h, weights, .. } => {
            let kg = kernels::gram(spec_g, z, train_z)?.values;
            let kh = kernels::gram(spec_h, x, train_x)?.values;
            let m = z.rows();
            let n = train_z.rows();
            let mut out = vec![0.0; m];
            for i in 0..m {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += kg.get(i, j) * kh.get(i, j) * weights[j];
                }
                out[i] = acc;
            }
            Ok(out)
        }
        BaselineModel::ZOnly(m) => Ok(kernels::krr_predict(m, z)?),
        BaselineModel::XOnly(m) => Ok(kernels::krr_predict(m, x)?),
        BaselineModel::ZxConcat { model, z_scale, x_scale, z_dim } => {
            if z.cols() != *z_dim {
                return Err(BaselineError::Dimension("treatment block width".into()));
            }
            let concat = concat_scaled(z, x, *z_scale, *x_scale);
            Ok(kernels::krr_predict(model, &concat)?)
        }
    }
}

fn mean_row_norm(m: &DenseMatrix) -> f64 {
    let total: f64 = (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    let mean = total / m.rows() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

fn concat_scaled(z: &DenseMatrix, x: &DenseMatrix, z_scale: f64, x_scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(z.rows(), z.cols() + x.cols(), |i, j| {
        if j < z.cols() {
            z.get(i, j) / z_scale
        } else {
            x.get(i, j - z.cols()) / x_scale
        }
    })
}
