//! Single-hidden-layer perceptron trained with mini-batch adam.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, validate_training_set, Predictor};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 30,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 200,
            seed: 42,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config(
                "mlp hidden, batch_size and epochs must be positive",
            ));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::config(
                "mlp learning_rate and epsilon must be positive",
            ));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::config("mlp decay rates must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// `inputs → hidden (relu) → 1`, predicting standardized targets.
///
/// Flat parameter order: hidden weights (row-major, one row per hidden
/// unit), hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    n_inputs: usize,
    hidden: usize,
    params: Vec<f64>,
    y_mean: f64,
    y_std: f64,
}

impl MlpModel {
    /// All weights zero; predicts `y_mean`.
    pub fn zeros(n_inputs: usize, hidden: usize, y_mean: f64, y_std: f64) -> Self {
        MlpModel {
            n_inputs,
            hidden,
            params: vec![0.0; n_inputs * hidden + 2 * hidden + 1],
            y_mean,
            y_std,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(n_inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(n_inputs, hidden, 0.0, 1.0);
        let l1 = (6.0 / (n_inputs + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        let (w1, rest) = m.params.split_at_mut(n_inputs * hidden);
        for w in w1 {
            *w = rng.random_range(-l1..=l1);
        }
        for w in &mut rest[hidden..2 * hidden] {
            *w = rng.random_range(-l2..=l2);
        }
        m
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.n_inputs * self.hidden;
        let w2 = b1 + self.hidden;
        (b1, w2, w2 + self.hidden)
    }

    /// Network output in standardized target units.
    pub fn raw_output(&self, x: &[f64]) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let mut out = self.params[b2];
        for h in 0..self.hidden {
            let row = &self.params[h * self.n_inputs..(h + 1) * self.n_inputs];
            let z = self.params[b1 + h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if z > 0.0 {
                out += self.params[w2 + h] * z;
            }
        }
        out
    }

    /// Mean squared error of the raw output against `targets` on a batch,
    /// and its gradient in flat parameter order.
    pub fn batch_loss_and_gradient(&self, rows: &[&[f64]], targets: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(rows, targets, &mut grad, &mut vec![0.0; self.hidden]);
        (loss, grad)
    }

    fn accumulate_gradient(
        &self,
        rows: &[&[f64]],
        targets: &[f64],
        grad: &mut [f64],
        z: &mut [f64],
    ) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let n_in = self.n_inputs;
        grad.fill(0.0);
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for (x, &t) in rows.iter().zip(targets) {
            let mut out = self.params[b2];
            for (h, zh) in z.iter_mut().enumerate().take(self.hidden) {
                let row = &self.params[h * n_in..(h + 1) * n_in];
                *zh =
                    self.params[b1 + h] + row.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
                if *zh > 0.0 {
                    out += self.params[w2 + h] * *zh;
                }
            }
            let err = out - t;
            loss += err * err * scale;
            let d_out = 2.0 * err * scale;
            grad[b2] += d_out;
            for h in 0..self.hidden {
                if z[h] > 0.0 {
                    grad[w2 + h] += d_out * z[h];
                    let d_z = d_out * self.params[w2 + h];
                    grad[b1 + h] += d_z;
                    for (g, v) in grad[h * n_in..(h + 1) * n_in].iter_mut().zip(x.iter()) {
                        *g += d_z * v;
                    }
                }
            }
        }
        loss
    }

    /// Text serialization:
    ///
    /// ```text
    /// mlp-model 1
    /// n_inputs <usize>
    /// hidden <usize>
    /// y_mean <f64>
    /// y_std <f64>
    /// params <count>
    /// <one f64 per line, flat parameter order>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "mlp-model 1").unwrap();
        writeln!(s, "n_inputs {}", self.n_inputs).unwrap();
        writeln!(s, "hidden {}", self.hidden).unwrap();
        writeln!(s, "y_mean {:e}", self.y_mean).unwrap();
        writeln!(s, "y_std {:e}", self.y_std).unwrap();
        writeln!(s, "params {}", self.params.len()).unwrap();
        for p in &self.params {
            writeln!(s, "{p:e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut field = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(format!("missing {key}")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                _ => Err(Error::parse(format!(
                    "expected '{key} <value>', got '{line}'"
                ))),
            }
        };
        let parse_f = |s: String| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(format!("invalid number '{s}'")))
        };
        let parse_u = |s: String| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(format!("invalid count '{s}'")))
        };
        if field("mlp-model")? != "1" {
            return Err(Error::parse("unsupported mlp-model version"));
        }
        let n_inputs = parse_u(field("n_inputs")?)?;
        let hidden = parse_u(field("hidden")?)?;
        let y_mean = parse_f(field("y_mean")?)?;
        let y_std = parse_f(field("y_std")?)?;
        let count = parse_u(field("params")?)?;
        let mut m = MlpModel::zeros(n_inputs, hidden, y_mean, y_std);
        if count != m.params.len() {
            return Err(Error::parse("parameter count does not match layer sizes"));
        }
        for p in m.params.iter_mut() {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("truncated parameter list"))?;
            *p = parse_f(line.to_string())?;
        }
        Ok(m)
    }
}

impl Predictor for MlpModel {
    fn n_features(&self) -> usize {
        self.n_inputs
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_inputs, "feature count mismatch");
        self.raw_output(x) * self.y_std + self.y_mean
    }
}

pub fn predict_mlp(m: &MlpModel, x: &[f64]) -> Result<f64> {
    check_dim(m.n_inputs, x.len())?;
    Ok(m.predict_row(x))
}

pub fn train_mlp(x: &[Vec<f64>], y: &[f64], p: &MlpParams) -> Result<MlpModel> {
    p.validate()?;
    let d = validate_training_set(x, y, 1)?;
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
    let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let targets: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

    let mut model = MlpModel::init(d, p.hidden, &mut stream_rng(p.seed, stream::MLP_INIT));
    model.y_mean = y_mean;
    model.y_std = y_std;

    let n_params = model.params.len();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut z = vec![0.0; p.hidden];
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut rng = stream_rng(p.seed, stream::MLP_ORDER);
    let mut step = 0i32;
    let mut rows: Vec<&[f64]> = Vec::with_capacity(p.batch_size);
    let mut batch_t = Vec::with_capacity(p.batch_size);

    for _ in 0..p.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(p.batch_size) {
            rows.clear();
            batch_t.clear();
            rows.extend(chunk.iter().map(|&i| x[i].as_slice()));
            batch_t.extend(chunk.iter().map(|&i| targets[i]));
            model.accumulate_gradient(&rows, &batch_t, &mut grad, &mut z);
            step += 1;
            let c1 = 1.0 - p.beta1.powi(step);
            let c2 = 1.0 - p.beta2.powi(step);
            for k in 0..n_params {
                m1[k] = p.beta1 * m1[k] + (1.0 - p.beta1) * grad[k];
                m2[k] = p.beta2 * m2[k] + (1.0 - p.beta2) * grad[k] * grad[k];
                let m_hat = m1[k] / c1;
                let v_hat = m2[k] / c2;
                model.params[k] -= p.learning_rate * m_hat / (v_hat.sqrt() + p.epsilon);
            }
        }
    }
    Ok(model)
}
