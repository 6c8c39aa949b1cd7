//! `bench`: estimation-error table across planted ranks, comparing the
//! double-kernel fit against the product-kernel baseline with mean (std)
//! over seeds.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use dkrl_core::baselines::{baseline_fit, baseline_predict, BaselineKind};
use dkrl_core::estimators::{dkrl_fit_indexed, dkrl_predict, DkrlConfig};
use dkrl_core::kernels::{median_lengthscale, KernelSpec};
use dkrl_core::presets;
use dkrl_core::seeding::{self, streams};
use dkrl_core::simdata::{NoiseSpec, ThetaVariant};

use crate::config::BenchConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::Manifest;

struct RunMetrics {
    train: f64,
    test: f64,
    seconds: f64,
}

pub fn run(cfg: &BenchConfig) -> Result<()> {
    if cfg.ranks.is_empty() || cfg.seeds.is_empty() {
        return Err(CliError::Config("ranks and seeds must be nonempty".into()));
    }
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(CliError::Config(format!("split {} outside (0, 1)", cfg.split)));
    }
    let base = presets::gen_preset(&cfg.preset)
        .ok_or_else(|| CliError::Config(format!("unknown preset {:?}", cfg.preset)))?;
    io::ensure_dir(&cfg.out_dir)?;

    let mut csv = String::from(
        "rank,method,train_mse_mean,train_mse_std,test_mse_mean,test_mse_std,seconds_mean,seconds_std\n",
    );
    for &rank in &cfg.ranks {
        let runs: Vec<Result<(RunMetrics, RunMetrics)>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| run_one(cfg, &base, rank, seed))
            .collect();
        let mut dkrl = Vec::new();
        let mut prod = Vec::new();
        for r in runs {
            let (d, p) = r?;
            dkrl.push(d);
            prod.push(p);
        }
        append_row(&mut csv, rank, "dkrl", &dkrl);
        append_row(&mut csv, rank, "prod_kernel", &prod);
    }
    io::write_string(&cfg.out_dir.join("bench.csv"), &csv)?;
    let manifest = Manifest::new("bench", json!(cfg.seeds), cfg.clone())?;
    manifest.write(&cfg.out_dir.join("manifest.json"))
}

fn run_one(
    cfg: &BenchConfig,
    base: &presets::GenSpec,
    rank: usize,
    seed: u64,
) -> Result<(RunMetrics, RunMetrics)> {
    let spec = presets::GenSpec {
        theta: ThetaVariant::LowRank { rank },
        noise: NoiseSpec::Gaussian { sigma: cfg.sigma },
        ..base.clone()
    };
    let (design, _theta, set) = presets::generate_dataset(&spec, seed)?;
    let n = set.y.len();
    let order = seeding::shuffled_indices(n, seed, streams::SPLIT);
    let n_train = ((cfg.split * n as f64).floor() as usize).clamp(1, n - 1);
    let (train, test) = order.split_at(n_train);

    let zt = set.z.select_rows(train);
    let xt = set.x.select_rows(train);
    let yt: Vec<f64> = train.iter().map(|&i| set.y[i]).collect();
    let zs = set.z.select_rows(test);
    let xs = set.x.select_rows(test);
    let ys: Vec<f64> = test.iter().map(|&i| set.y[i]).collect();
    let spec_g = KernelSpec::Gaussian { lengthscale: median_lengthscale(&zt) };
    let spec_h = KernelSpec::Gaussian { lengthscale: median_lengthscale(&xt) };
    let mse = |pred: &[f64], truth: &[f64]| {
        pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64
    };

    let dkrl_cfg = DkrlConfig {
        rank,
        lambda: cfg.lambda,
        max_iter: 60,
        tol: 1e-8,
        seed,
        ..DkrlConfig::default()
    };
    let z_of: Vec<usize> = train.iter().map(|&i| set.indices.e_z[i]).collect();
    let x_of: Vec<usize> = train.iter().map(|&i| set.indices.e_x[i]).collect();
    let unit = vec![1.0; n_train];
    let started = Instant::now();
    let model = dkrl_fit_indexed(
        &design.z_points(),
        &design.x_points(),
        &z_of,
        &x_of,
        &yt,
        &unit,
        &dkrl_cfg,
        &spec_g,
        &spec_h,
    )?;
    let dkrl_seconds = started.elapsed().as_secs_f64();
    let dkrl_metrics = RunMetrics {
        train: mse(&dkrl_predict(&model, &zt, &xt)?, &yt),
        test: mse(&dkrl_predict(&model, &zs, &xs)?, &ys),
        seconds: dkrl_seconds,
    };

    let started = Instant::now();
    let prod = baseline_fit(&zt, &xt, &yt, BaselineKind::ProdKernel, &spec_g, &spec_h, cfg.lambda)?;
    let prod_seconds = started.elapsed().as_secs_f64();
    let prod_metrics = RunMetrics {
        train: mse(&baseline_predict(&prod, &zt, &xt)?, &yt),
        test: mse(&baseline_predict(&prod, &zs, &xs)?, &ys),
        seconds: prod_seconds,
    };
    Ok((dkrl_metrics, prod_metrics))
}

fn append_row(csv: &mut String, rank: usize, method: &str, runs: &[RunMetrics]) {
    let stats = |get: fn(&RunMetrics) -> f64| {
        let vals: Vec<f64> = runs.iter().map(get).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    let (train_mean, train_std) = stats(|r| r.train);
    let (test_mean, test_std) = stats(|r| r.test);
    let (sec_mean, sec_std) = stats(|r| r.seconds);
    let _ = writeln!(
        csv,
        "{rank},{method},{train_mean},{train_std},{test_mean},{test_std},{sec_mean},{sec_std}"
    );
}
