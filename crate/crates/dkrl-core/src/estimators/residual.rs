//! Outcome-model residualization: replace `y` by `y - m_hat(x)` before the
//! interaction fit, with optional cross-fitting over folds.

use crate::kernels::{self, KrrModel};
use crate::numerics::DenseMatrix;

use super::{EstimatorError, OutcomeConfig, Result};

/// Residualize outcomes against a kernel-ridge estimate of `E[y | x]`.
///
/// `folds = 1` fits on all data; `folds > 1` cross-fits (each fold predicted
/// by a model trained on the others; the returned model is the all-data
/// fit). Residuals are centered to sample mean zero, so no constant leaks
/// into the interaction term.
pub fn residualize(
    x: &DenseMatrix,
    y: &[f64],
    cfg: &OutcomeConfig,
) -> Result<(Vec<f64>, Option<KrrModel>)> {
    match cfg {
        OutcomeConfig::None => Ok((y.to_vec(), None)),
        OutcomeConfig::KernelRidge { spec, lambda_m, folds } => {
            let n = x.rows();
            if y.len() != n {
                return Err(EstimatorError::Dimension("outcome length".into()));
            }
            if !(lambda_m.is_finite() && *lambda_m > 0.0) {
                return Err(EstimatorError::InvalidConfig("lambda_m must be > 0".into()));
            }
            if *folds == 0 || *folds > n {
                return Err(EstimatorError::InvalidConfig(format!(
                    "folds {} out of range for n = {}",
                    folds, n
                )));
            }
            let mut residuals = vec![0.0; n];
            if *folds == 1 {
                let model = kernels::krr_fit(x, y, spec, *lambda_m)?;
                let fitted = kernels::krr_predict(&model, x)?;
                for i in 0..n {
                    residuals[i] = y[i] - fitted[i];
                }
                center(&mut residuals);
                return Ok((residuals, Some(model)));
            }
            // deterministic round-robin fold assignment
            for f in 0..*folds {
                let held: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
                let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
                let xt = x.select_rows(&train);
                let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let model = kernels::krr_fit(&xt, &yt, spec, *lambda_m)?;
                let preds = kernels::krr_predict(&model, &x.select_rows(&held))?;
                for (slot, &i) in held.iter().enumerate() {
                    residuals[i] = y[i] - preds[slot];
                }
            }
            center(&mut residuals);
            let full = kernels::krr_fit(x, y, spec, *lambda_m)?;
            Ok((residuals, Some(full)))
        }
    }
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}
