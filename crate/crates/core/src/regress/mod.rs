//! Supervised approximations of the genome → OIP map.

mod gb;
mod mlp;
mod sweep;
mod tree;

pub use gb::{huber_loss, predict_gb, train_gb, train_gb_traced, GbModel, GbParams};
pub use mlp::{predict_mlp, train_mlp, MlpModel, MlpParams};
pub use sweep::{default_fractions, sample_size_sweep, SweepParams, SweepResult, SweepRow};
pub use tree::{Node, RegressionTree};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted model mapping a feature row to a prediction.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    /// Predicts one row. Panics if the row length differs from
    /// [`Predictor::n_features`].
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n_features(), x.len())?;
        Ok(self.predict_row(x))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "expected {expected} features, got {got}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Gb,
    Mlp,
}

impl std::str::FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gb" => Ok(RegressorKind::Gb),
            "mlp" => Ok(RegressorKind::Mlp),
            other => Err(Error::domain(format!("unknown regressor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub gb: GbParams,
    pub mlp: MlpParams,
}

/// Either fitted regressor behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gb(GbModel),
    Mlp(MlpModel),
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Gb(m) => m.n_features(),
            Model::Mlp(m) => m.n_features(),
        }
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::Gb(m) => m.predict_row(x),
            Model::Mlp(m) => m.predict_row(x),
        }
    }
}

pub fn train(kind: RegressorKind, x: &[Vec<f64>], y: &[f64], p: &TrainParams) -> Result<Model> {
    match kind {
        RegressorKind::Gb => train_gb(x, y, &p.gb).map(Model::Gb),
        RegressorKind::Mlp => train_mlp(x, y, &p.mlp).map(Model::Mlp),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
}

pub fn error_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<ErrorMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::domain("error metrics of empty input"));
    }
    let n = y_true.len() as f64;
    let (sq, abs) = y_true
        .iter()
        .zip(y_pred)
        .fold((0.0, 0.0), |(sq, abs), (t, p)| {
            (sq + (p - t) * (p - t), abs + (p - t).abs())
        });
    let mse = sq / n;
    Ok(ErrorMetrics {
        mse,
        rmse: mse.sqrt(),
        mae: abs / n,
    })
}

pub(crate) fn validate_training_set(x: &[Vec<f64>], y: &[f64], min_rows: usize) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "{} rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_rows {
        return Err(Error::domain(format!(
            "need at least {min_rows} training rows, got {}",
            x.len()
        )));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::domain("training rows have no features"));
    }
    for row in x {
        check_dim(d, row.len())?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite target value"));
    }
    Ok(d)
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Quantile with linear interpolation between order statistics.
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_metric_examples() {
        let m = error_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.mse, m.rmse, m.mae), (0.0, 0.0, 0.0));
        let m = error_metrics(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!((m.mse, m.rmse, m.mae), (1.0, 1.0, 1.0));
        let m = error_metrics(&[0.0, 0.0], &[0.0, 2.0]).unwrap();
        assert_eq!((m.mse, m.rmse, m.mae), (2.0, 2f64.sqrt(), 1.0));
        assert!(error_metrics(&[0.0], &[0.0, 1.0]).is_err());
        assert!(error_metrics(&[], &[]).is_err());
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.9), 9.0);
        assert_eq!(quantile(&[5.0], 0.9), 5.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
    }

    #[test]
    fn regressor_kind_parses() {
        assert_eq!("gb".parse::<RegressorKind>().unwrap(), RegressorKind::Gb);
        assert_eq!("mlp".parse::<RegressorKind>().unwrap(), RegressorKind::Mlp);
        assert!("svm".parse::<RegressorKind>().is_err());
    }
}
