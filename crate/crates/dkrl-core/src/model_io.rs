//! Flat JSON serialization envelope shared by the double-kernel model and
//! the baselines, discriminated by a `kind` tag. Matrices carry explicit
//! dims with row-major data; training Grams are recomputed on load.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineModel;
use crate::estimators::DkrlModel;
use crate::kernels::{self, KernelSpec, KrrModel, DEFAULT_JITTER};
use crate::numerics::DenseMatrix;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent document: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Kernel(#[from] kernels::KernelError),
}

pub type Result<T> = std::result::Result<T, ModelIoError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelDocument {
    Dkrl {
        spec_g: KernelSpec,
        spec_h: KernelSpec,
        lambda: f64,
        rank: usize,
        train_z: DenseMatrix,
        train_x: DenseMatrix,
        u: DenseMatrix,
        v: DenseMatrix,
        loss_trace: Vec<f64>,
    },
    ProdKernel {
        spec_g: KernelSpec,
        spec_h: KernelSpec,
        lambda: f64,
        train_z: DenseMatrix,
        train_x: DenseMatrix,
        weights: Vec<f64>,
    },
    ZOnly {
        spec: KernelSpec,
        lambda: f64,
        points: DenseMatrix,
        weights: Vec<f64>,
    },
    XOnly {
        spec: KernelSpec,
        lambda: f64,
        points: DenseMatrix,
        weights: Vec<f64>,
    },
    ZxConcat {
        spec: KernelSpec,
        lambda: f64,
        points: DenseMatrix,
        weights: Vec<f64>,
        z_scale: f64,
        x_scale: f64,
        z_dim: usize,
    },
}

impl ModelDocument {
    pub fn from_dkrl(model: &DkrlModel) -> Self {
        ModelDocument::Dkrl {
            spec_g: model.spec_g.clone(),
            spec_h: model.spec_h.clone(),
            lambda: model.lambda,
            rank: model.rank(),
            train_z: model.train_z.clone(),
            train_x: model.train_x.clone(),
            u: model.u.clone(),
            v: model.v.clone(),
            loss_trace: model.loss_trace.clone(),
        }
    }

    pub fn from_baseline(model: &BaselineModel) -> Self {
        match model {
            BaselineModel::ProdKernel { train_z, train_x, spec_g, spec_h, weights, lambda } => {
                ModelDocument::ProdKernel {
                    spec_g: spec_g.clone(),
                    spec_h: spec_h.clone(),
                    lambda: *lambda,
                    train_z: train_z.clone(),
                    train_x: train_x.clone(),
                    weights: weights.clone(),
                }
            }
            BaselineModel::ZOnly(m) => ModelDocument::ZOnly {
                spec: m.spec.clone(),
                lambda: m.lambda,
                points: m.points.clone(),
                weights: m.weights.clone(),
            },
            BaselineModel::XOnly(m) => ModelDocument::XOnly {
                spec: m.spec.clone(),
                lambda: m.lambda,
                points: m.points.clone(),
                weights: m.weights.clone(),
            },
            BaselineModel::ZxConcat { model, z_scale, x_scale, z_dim } => {
                ModelDocument::ZxConcat {
                    spec: model.spec.clone(),
                    lambda: model.lambda,
                    points: model.points.clone(),
                    weights: model.weights.clone(),
                    z_scale: *z_scale,
                    x_scale: *x_scale,
                    z_dim: *z_dim,
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuild the runtime double-kernel model, recomputing the jittered
    /// training Grams.
    pub fn into_dkrl(self) -> Result<DkrlModel> {
        match self {
            ModelDocument::Dkrl {
                spec_g,
                spec_h,
                lambda,
                rank,
                train_z,
                train_x,
                u,
                v,
                loss_trace,
            } => {
                // factored-index fits carry one factor row per distinct
                // point, so each side validates against its own point set
                if u.rows() != train_z.rows()
                    || v.rows() != train_x.rows()
                    || u.cols() != rank
                    || v.cols() != rank
                {
                    return Err(ModelIoError::Inconsistent(format!(
                        "factors are {}x{} and {}x{} for {} treatment and {} covariate points, rank = {}",
                        u.rows(),
                        u.cols(),
                        v.rows(),
                        v.cols(),
                        train_z.rows(),
                        train_x.rows(),
                        rank
                    )));
                }
                let gram_g =
                    kernels::jitter(&kernels::gram_sym(&spec_g, &train_z)?, DEFAULT_JITTER)?;
                let gram_h =
                    kernels::jitter(&kernels::gram_sym(&spec_h, &train_x)?, DEFAULT_JITTER)?;
                let iterations_run = loss_trace.len().saturating_sub(1);
                Ok(DkrlModel {
                    u,
                    v,
                    gram_g,
                    gram_h,
                    train_z,
                    train_x,
                    spec_g,
                    spec_h,
                    lambda,
                    loss_trace,
                    iterations_run,
                })
            }
            other => Err(ModelIoError::Inconsistent(format!(
                "expected a dkrl document, found {:?} tag",
                std::mem::discriminant(&other)
            ))),
        }
    }

    pub fn into_baseline(self) -> Result<BaselineModel> {
        match self {
            ModelDocument::ProdKernel { spec_g, spec_h, lambda, train_z, train_x, weights } => {
                Ok(BaselineModel::ProdKernel { train_z, train_x, spec_g, spec_h, weights, lambda })
            }
            ModelDocument::ZOnly { spec, lambda, points, weights } => {
                Ok(BaselineModel::ZOnly(KrrModel { points, weights, spec, lambda }))
            }
            ModelDocument::XOnly { spec, lambda, points, weights } => {
                Ok(BaselineModel::XOnly(KrrModel { points, weights, spec, lambda }))
            }
            ModelDocument::ZxConcat { spec, lambda, points, weights, z_scale, x_scale, z_dim } => {
                Ok(BaselineModel::ZxConcat {
                    model: KrrModel { points, weights, spec, lambda },
                    z_scale,
                    x_scale,
                    z_dim,
                })
            }
            ModelDocument::Dkrl { .. } => {
                Err(ModelIoError::Inconsistent("expected a baseline document".into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{baseline_fit, baseline_predict, BaselineKind};
    use crate::estimators::{dkrl_fit, dkrl_predict, DkrlConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss() -> KernelSpec {
        KernelSpec::Gaussian { lengthscale: 1.0 }
    }

    #[test]
    fn dkrl_document_round_trip_preserves_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = DenseMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
        let x = DenseMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = DkrlConfig { rank: 2, max_iter: 10, ..DkrlConfig::default() };
        let model = dkrl_fit(&z, &x, &y, &cfg, &gauss(), &gauss()).unwrap();
        let json = ModelDocument::from_dkrl(&model).to_json().unwrap();
        let back = ModelDocument::from_json(&json).unwrap().into_dkrl().unwrap();
        let zq = DenseMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        let xq = DenseMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        let a = dkrl_predict(&model, &zq, &xq).unwrap();
        let b = dkrl_predict(&back, &zq, &xq).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indexed_model_with_uneven_sides_round_trips() {
        // factored-index fits have different treatment and covariate point
        // counts; the document must survive the trip and so must trimming
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z_points = DenseMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        let x_points = DenseMatrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0));
        let n = 30;
        let z_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let x_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..6)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let unit = vec![1.0; n];
        let cfg = crate::estimators::DkrlConfig {
            rank: 3,
            max_iter: 15,
            ..crate::estimators::DkrlConfig::default()
        };
        let model = crate::estimators::dkrl_fit_indexed(
            &z_points, &x_points, &z_of, &x_of, &y, &unit, &cfg, &gauss(), &gauss(),
        )
        .unwrap();
        assert_ne!(model.u.rows(), model.v.rows());

        let json = ModelDocument::from_dkrl(&model).to_json().unwrap();
        let back = ModelDocument::from_json(&json).unwrap().into_dkrl().unwrap();
        let zq = DenseMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        let xq = DenseMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        assert_eq!(
            dkrl_predict(&model, &zq, &xq).unwrap(),
            dkrl_predict(&back, &zq, &xq).unwrap()
        );

        let trimmed = model.trimmed();
        assert_eq!(trimmed.u.rows(), 4);
        assert_eq!(trimmed.v.rows(), 6);
    }

    #[test]
    fn baseline_documents_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = DenseMatrix::from_fn(8, 2, |_, _| rng.gen_range(-1.0..1.0));
        let x = DenseMatrix::from_fn(8, 3, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for kind in [
            BaselineKind::ProdKernel,
            BaselineKind::ZOnly,
            BaselineKind::XOnly,
            BaselineKind::ZxConcat,
        ] {
            let model = baseline_fit(&z, &x, &y, kind, &gauss(), &gauss(), 0.05).unwrap();
            let json = ModelDocument::from_baseline(&model).to_json().unwrap();
            let back = ModelDocument::from_json(&json).unwrap().into_baseline().unwrap();
            let a = baseline_predict(&model, &z, &x).unwrap();
            let b = baseline_predict(&back, &z, &x).unwrap();
            assert_eq!(a, b, "{kind:?}");
        }
    }

    #[test]
    fn kind_tags_are_snake_case() {
        let doc = ModelDocument::ZOnly {
            spec: gauss(),
            lambda: 0.1,
            points: DenseMatrix::zeros(1, 1),
            weights: vec![0.0],
        };
        let json = doc.to_json().unwrap();
        assert!(json.contains("\"kind\": \"z_only\""), "{json}");
    }

    #[test]
    fn wrong_kind_rejected() {
        let doc = ModelDocument::ZOnly {
            spec: gauss(),
            lambda: 0.1,
            points: DenseMatrix::zeros(1, 1),
            weights: vec![0.0],
        };
        assert!(doc.into_dkrl().is_err());
    }
}
