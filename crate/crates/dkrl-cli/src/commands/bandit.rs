//! `bandit`: run explore-then-commit (full and treatment-only) across seeds,
//! write per-seed traces and a summary with regret slopes and quantile
//! bands. Seeds fan out across workers; the reduction sorts by seed.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use dkrl_core::bandit::{
    etc_run, etc_treatment_only, regret_slope, suggest_explore_rounds, BanditTrace, EtcConfig,
};
use dkrl_core::simdata::FixedBasisDesign;

use crate::config::BanditConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::Manifest;

const SLOPE_WINDOW: f64 = 0.5;

pub fn run(cfg: &BanditConfig) -> Result<()> {
    if cfg.seeds.is_empty() {
        return Err(CliError::Config("seeds list is empty".into()));
    }
    let design = load_design(cfg)?;
    if design.gamma_star.is_none() {
        return Err(CliError::Data("design carries no ground-truth interaction".into()));
    }
    let explore = cfg.explore_rounds.unwrap_or_else(|| {
        suggest_explore_rounds(cfg.horizon, design.d1(), design.d2(), cfg.estimator.rank)
    });
    io::ensure_dir(&cfg.out_dir)?;

    let runs: Vec<(u64, Result<(BanditTrace, BanditTrace)>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let etc = EtcConfig {
                horizon: cfg.horizon,
                explore_rounds: explore,
                seed,
                estimator: dkrl_core::estimators::DkrlConfig { seed, ..cfg.estimator.clone() },
                spec_g: cfg.spec_g.resolve(&design.z_points()),
                spec_h: cfg.spec_h.resolve(&design.x_points()),
                noise: cfg.noise.clone(),
                outcome: cfg.outcome.resolve(&design.x_points()),
            };
            let out = etc_run(&design, &etc)
                .map_err(|e| CliError::Numeric(format!("seed {seed}: {e}")))
                .and_then(|(full, _)| {
                    let z_only = etc_treatment_only(&design, &etc)
                        .map_err(|e| CliError::Numeric(format!("seed {seed}: {e}")))?;
                    Ok((full, z_only))
                });
            (seed, out)
        })
        .collect();

    let mut sorted: Vec<(u64, (BanditTrace, BanditTrace))> = Vec::with_capacity(runs.len());
    for (seed, out) in runs {
        sorted.push((seed, out?));
    }
    sorted.sort_by_key(|(seed, _)| *seed);

    let mut full_slopes = Vec::new();
    let mut z_slopes = Vec::new();
    for (seed, (full, z_only)) in &sorted {
        io::write_string(
            &cfg.out_dir.join(format!("trace_full_seed{seed}.csv")),
            &full.to_csv(),
        )?;
        io::write_string(
            &cfg.out_dir.join(format!("trace_treatment_only_seed{seed}.csv")),
            &z_only.to_csv(),
        )?;
        full_slopes.push(regret_slope(full, SLOPE_WINDOW)?);
        z_slopes.push(regret_slope(z_only, SLOPE_WINDOW)?);
    }

    let full_band = quantile_band(sorted.iter().map(|(_, (f, _))| f).collect());
    let z_band = quantile_band(sorted.iter().map(|(_, (_, z))| z).collect());
    let summary = json!({
        "seeds": sorted.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
        "horizon": cfg.horizon,
        "explore_rounds": explore,
        "slope_window": SLOPE_WINDOW,
        "full": {
            "slopes": full_slopes,
            "median_slope": median_of(&full_slopes),
            "regret_q15": full_band.0,
            "regret_median": full_band.1,
            "regret_q85": full_band.2,
        },
        "treatment_only": {
            "slopes": z_slopes,
            "median_slope": median_of(&z_slopes),
            "regret_q15": z_band.0,
            "regret_median": z_band.1,
            "regret_q85": z_band.2,
        },
    });
    io::write_string(
        &cfg.out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?
            + "\n"),
    )?;

    let manifest = Manifest::new("bandit", json!(cfg.seeds), cfg.clone())?;
    manifest.write(&cfg.out_dir.join("manifest.json"))
}

fn median_of(values: &[f64]) -> f64 {
    let mut copy = values.to_vec();
    io::median(&mut copy)
}

/// Per-round 15%/50%/85% quantiles of cumulative regret across seeds.
fn quantile_band(traces: Vec<&BanditTrace>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let horizon = traces.iter().map(|t| t.rounds.len()).min().unwrap_or(0);
    let mut q15 = Vec::with_capacity(horizon);
    let mut q50 = Vec::with_capacity(horizon);
    let mut q85 = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut at_round: Vec<f64> =
            traces.iter().map(|tr| tr.rounds[t].cumulative_regret).collect();
        at_round.sort_by(|a, b| a.partial_cmp(b).unwrap());
        q15.push(io::quantile_sorted(&at_round, 0.15));
        q50.push(io::quantile_sorted(&at_round, 0.50));
        q85.push(io::quantile_sorted(&at_round, 0.85));
    }
    (q15, q50, q85)
}

fn load_design(cfg: &BanditConfig) -> Result<FixedBasisDesign> {
    match (&cfg.design.preset, &cfg.design.path) {
        (Some(name), None) => dkrl_core::presets::bandit_design_preset(name)
            .ok_or_else(|| CliError::Config(format!("unknown design preset {:?}", name))),
        (None, Some(path)) => load_design_file(path),
        _ => Err(CliError::Config("give exactly one of design.preset or design.path".into())),
    }
}

fn load_design_file(path: &Path) -> Result<FixedBasisDesign> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {}", path.display(), e)))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}
