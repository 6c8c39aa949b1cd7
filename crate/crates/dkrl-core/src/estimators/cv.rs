//! Grid cross-validation over penalty level and rank.

use rand::seq::SliceRandom;

use crate::kernels::KernelSpec;
use crate::numerics::DenseMatrix;
use crate::seeding::{self, streams};

use super::{dkrl_fit, dkrl_predict, DkrlConfig, EstimatorError, Result};

#[derive(Debug, Clone)]
pub struct CvEntry {
    pub lambda: f64,
    pub rank: usize,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub best_lambda: f64,
    pub best_rank: usize,
    pub table: Vec<CvEntry>,
}

/// K-fold cross-validation over the (lambda, rank) grid. Selects the grid
/// point minimizing mean held-out MSE; ties break toward larger lambda, then
/// smaller rank. Fold assignment is a seeded permutation split into
/// contiguous chunks.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    z: &DenseMatrix,
    x: &DenseMatrix,
    y: &[f64],
    spec_g: &KernelSpec,
    spec_h: &KernelSpec,
    lambda_grid: &[f64],
    rank_grid: &[usize],
    folds: usize,
    seed: u64,
    base: &DkrlConfig,
) -> Result<CvReport> {
    let n = y.len();
    if lambda_grid.is_empty() || rank_grid.is_empty() {
        return Err(EstimatorError::InvalidConfig("empty grid".into()));
    }
    if folds < 2 || folds > n {
        return Err(EstimatorError::InvalidConfig(format!(
            "folds {} out of range for n = {}",
            folds, n
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::stream_rng(seed, streams::FOLDS));
    let fold_of = |pos: usize| pos * folds / n;

    let mut table = Vec::with_capacity(lambda_grid.len() * rank_grid.len());
    for &lambda in lambda_grid {
        for &rank in rank_grid {
            let mut fold_mse = Vec::with_capacity(folds);
            for f in 0..folds {
                let train: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| fold_of(*pos) != f)
                    .map(|(_, &i)| i)
                    .collect();
                let held: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| fold_of(*pos) == f)
                    .map(|(_, &i)| i)
                    .collect();
                let cfg = DkrlConfig { lambda, rank, ..base.clone() };
                let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let model = dkrl_fit(
                    &z.select_rows(&train),
                    &x.select_rows(&train),
                    &yt,
                    &cfg,
                    spec_g,
                    spec_h,
                )?;
                let pred =
                    dkrl_predict(&model, &z.select_rows(&held), &x.select_rows(&held))?;
                let mse = pred
                    .iter()
                    .zip(held.iter().map(|&i| y[i]))
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
                    / held.len() as f64;
                fold_mse.push(mse);
            }
            let mean_mse = fold_mse.iter().sum::<f64>() / folds as f64;
            table.push(CvEntry { lambda, rank, fold_mse, mean_mse });
        }
    }

    let best = table
        .iter()
        .min_by(|a, b| {
            a.mean_mse
                .partial_cmp(&b.mean_mse)
                .unwrap()
                // ties: prefer the larger lambda, then the smaller rank
                .then(b.lambda.partial_cmp(&a.lambda).unwrap())
                .then(a.rank.cmp(&b.rank))
        })
        .expect("nonempty table");
    Ok(CvReport { best_lambda: best.lambda, best_rank: best.rank, table })
}
