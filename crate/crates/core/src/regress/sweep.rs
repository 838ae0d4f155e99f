//! Hold-out error as a function of training sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{error_metrics, train, Predictor, RegressorKind, TrainParams};
use crate::error::{Error, Result};
use crate::rng::{sample_indices, stream, stream_rng};

/// 5%, 10%, …, 80%.
pub fn default_fractions() -> Vec<f64> {
    (1..=16).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            fractions: default_fractions(),
            repeats: 5,
            seed: 42,
        }
    }
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config("sweep repeats must be at least 1"));
        }
        if self.fractions.is_empty() {
            return Err(Error::config("sweep needs at least one fraction"));
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::domain(format!("sweep fraction {f} outside (0, 1)")));
            }
        }
        if self.fractions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sweep fractions must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub repeats: usize,
    /// Square root of the hold-out MSE averaged over repeats.
    pub rmse_mean: f64,
    pub rmse_per_repeat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// For every (fraction, repeat) cell, trains on a seeded random sample of
/// `⌊fraction·n⌋` rows and measures RMSE on the remaining rows. Cells draw
/// from independent streams and may run in parallel.
pub fn sample_size_sweep(
    x: &[Vec<f64>],
    y: &[f64],
    params: &SweepParams,
    kind: RegressorKind,
    train_params: &TrainParams,
) -> Result<SweepResult> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::domain("features and labels differ in length"));
    }
    let n = x.len();
    let cells: Vec<(usize, usize)> = (0..params.fractions.len())
        .flat_map(|f| (0..params.repeats).map(move |r| (f, r)))
        .collect();
    let mse: Vec<f64> = cells
        .par_iter()
        .map(|&(f, r)| {
            let k = (params.fractions[f] * n as f64).floor() as usize;
            if k < 1 || k >= n {
                return Err(Error::domain(format!(
                    "fraction {} leaves an empty training or test set",
                    params.fractions[f]
                )));
            }
            let key = stream::SWEEP + (f as u64) * 1_000_000 + r as u64;
            let train_idx = sample_indices(&mut stream_rng(params.seed, key), n, k);
            let mut in_train = vec![false; n];
            for &i in &train_idx {
                in_train[i] = true;
            }
            let tx: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
            let model = train(kind, &tx, &ty, train_params)?;
            let (truth, pred): (Vec<f64>, Vec<f64>) = (0..n)
                .filter(|&i| !in_train[i])
                .map(|i| (y[i], model.predict_row(&x[i])))
                .unzip();
            Ok(error_metrics(&truth, &pred)?.mse)
        })
        .collect::<Result<_>>()?;

    let rows = params
        .fractions
        .iter()
        .enumerate()
        .map(|(f, &fraction)| {
            let cell = &mse[f * params.repeats..(f + 1) * params.repeats];
            SweepRow {
                fraction,
                repeats: params.repeats,
                rmse_mean: (cell.iter().sum::<f64>() / cell.len() as f64).sqrt(),
                rmse_per_repeat: cell.iter().map(|m| m.sqrt()).collect(),
            }
        })
        .collect();
    Ok(SweepResult { rows })
}
