//! `fit`: train the double-kernel estimator or a baseline on a dataset
//! directory, write the model document and a metrics report.

use std::time::Instant;

use serde_json::json;

use dkrl_core::baselines::{baseline_fit, baseline_predict};
use dkrl_core::estimators::{dedup_rows, dkrl_fit_indexed, dkrl_predict, residualize};
use dkrl_core::kernels;
use dkrl_core::model_io::ModelDocument;
use dkrl_core::seeding::{self, streams};

use crate::config::{EstimatorChoice, FitConfig};
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::config_hash;

pub fn run(cfg: &FitConfig) -> Result<()> {
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(CliError::Config(format!("split {} outside (0, 1)", cfg.split)));
    }
    let z = io::load_matrix(&cfg.data_dir.join("z.csv"))?;
    let x = io::load_matrix(&cfg.data_dir.join("x.csv"))?;
    let y = io::load_vector(&cfg.data_dir.join("y.csv"))?;
    let n = y.len();
    if z.rows() != n || x.rows() != n {
        return Err(CliError::Data(format!(
            "row counts differ: z {}, x {}, y {}",
            z.rows(),
            x.rows(),
            n
        )));
    }

    // seeded shuffle split
    let order = seeding::shuffled_indices(n, cfg.seed, streams::SPLIT);
    let n_train = ((cfg.split * n as f64).floor() as usize).clamp(1, n - 1);
    let train = &order[..n_train];
    let test = &order[n_train..];

    let zt = z.select_rows(train);
    let xt = x.select_rows(train);
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let zs = z.select_rows(test);
    let xs = x.select_rows(test);
    let ys: Vec<f64> = test.iter().map(|&i| y[i]).collect();

    let spec_g = cfg.spec_g.resolve(&zt);
    let spec_h = cfg.spec_h.resolve(&xt);
    let started = Instant::now();
    let (residuals, m_hat) = residualize(&xt, &yt, &cfg.outcome.resolve(&xt))?;

    let (document, mut train_pred, mut test_pred, loss_trace_len) = match &cfg.estimator {
        EstimatorChoice::Dkrl { config } => {
            // exact duplicate points collapse into the factored index form
            let (z_points, z_of) = dedup_rows(&zt);
            let (x_points, x_of) = dedup_rows(&xt);
            let unit = vec![1.0; residuals.len()];
            let model = dkrl_fit_indexed(
                &z_points, &x_points, &z_of, &x_of, &residuals, &unit, config, &spec_g,
                &spec_h,
            )?;
            let train_pred = dkrl_predict(&model, &zt, &xt)?;
            let test_pred = dkrl_predict(&model, &zs, &xs)?;
            let len = model.loss_trace.len();
            (ModelDocument::from_dkrl(&model), train_pred, test_pred, len)
        }
        EstimatorChoice::Baseline { kind, lambda } => {
            let model = baseline_fit(&zt, &xt, &residuals, *kind, &spec_g, &spec_h, *lambda)?;
            let train_pred = baseline_predict(&model, &zt, &xt)?;
            let test_pred = baseline_predict(&model, &zs, &xs)?;
            (ModelDocument::from_baseline(&model), train_pred, test_pred, 0)
        }
    };
    // with an outcome model active, score full outcome predictions
    // m_hat(x) + tau_hat(z, x) against the raw outcomes
    if let Some(m) = &m_hat {
        for (p, base) in train_pred.iter_mut().zip(kernels::krr_predict(m, &xt)?) {
            *p += base;
        }
        for (p, base) in test_pred.iter_mut().zip(kernels::krr_predict(m, &xs)?) {
            *p += base;
        }
    }
    let seconds = started.elapsed().as_secs_f64();

    let mse = |pred: &[f64], truth: &[f64]| {
        pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64
    };
    let train_mse = mse(&train_pred, &yt);
    let test_mse = mse(&test_pred, &ys);

    io::write_string(&cfg.out_model, &(document.to_json()? + "\n"))?;
    let metrics = json!({
        "train_mse": train_mse,
        "test_mse": test_mse,
        "seconds": seconds,
        "loss_trace_len": loss_trace_len,
        "n_train": n_train,
        "n_test": n - n_train,
        "split": cfg.split,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg)?,
        "version": env!("CARGO_PKG_VERSION"),
    });
    io::write_string(
        &cfg.out_metrics,
        &(serde_json::to_string_pretty(&metrics)
            .map_err(|e| CliError::Config(e.to_string()))?
            + "\n"),
    )
}
