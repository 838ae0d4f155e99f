//! Gradient boosted regression trees with the huber loss.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tree::{grow, GrowParams, Node, RankedFeatures, RegressionTree};
use super::{check_dim, median, quantile, validate_training_set, Predictor};
use crate::error::{Error, Result};

/// Lower bound on the per-stage huber threshold.
const MIN_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbParams {
    pub n_stages: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Quantile of absolute residuals used as the huber threshold.
    pub huber_alpha: f64,
    pub min_samples_split: usize,
    /// Recorded for reproducibility; training draws no random numbers.
    pub seed: u64,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            n_stages: 100,
            max_depth: 80,
            learning_rate: 0.1,
            huber_alpha: 0.9,
            min_samples_split: 2,
            seed: 42,
        }
    }
}

impl GbParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::config("gb n_stages must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("gb learning_rate must be positive"));
        }
        if !(self.huber_alpha > 0.0 && self.huber_alpha < 1.0) {
            return Err(Error::config("gb huber_alpha must lie in (0, 1)"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::config("gb min_samples_split must be at least 2"));
        }
        Ok(())
    }
}

/// Huber loss and its derivative with respect to the residual.
pub fn huber_loss(residual: f64, delta: f64) -> (f64, f64) {
    debug_assert!(delta > 0.0);
    if residual.abs() <= delta {
        (0.5 * residual * residual, residual)
    } else {
        (
            delta * (residual.abs() - 0.5 * delta),
            delta * residual.signum(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbModel {
    n_features: usize,
    init_prediction: f64,
    learning_rate: f64,
    huber_alpha: f64,
    trees: Vec<RegressionTree>,
}

impl GbModel {
    /// A model made of `init_prediction` and the given trees.
    pub fn from_parts(
        n_features: usize,
        init_prediction: f64,
        learning_rate: f64,
        huber_alpha: f64,
        trees: Vec<RegressionTree>,
    ) -> Self {
        GbModel {
            n_features,
            init_prediction,
            learning_rate,
            huber_alpha,
            trees,
        }
    }

    pub fn init_prediction(&self) -> f64 {
        self.init_prediction
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    /// Text serialization, one record per line:
    ///
    /// ```text
    /// gb-model 1
    /// n_features <usize>
    /// init_prediction <f64>
    /// learning_rate <f64>
    /// huber_alpha <f64>
    /// n_trees <usize>
    /// tree <n_nodes>            (then n_nodes node lines, node 0 first)
    /// split <feature> <threshold> <left> <right>
    /// leaf <value>
    /// ```
    ///
    /// Reals are written in shortest round-trip form so a reloaded model
    /// predicts bit-identically.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "gb-model 1").unwrap();
        writeln!(s, "n_features {}", self.n_features).unwrap();
        writeln!(s, "init_prediction {:e}", self.init_prediction).unwrap();
        writeln!(s, "learning_rate {:e}", self.learning_rate).unwrap();
        writeln!(s, "huber_alpha {:e}", self.huber_alpha).unwrap();
        writeln!(s, "n_trees {}", self.trees.len()).unwrap();
        for t in &self.trees {
            writeln!(s, "tree {}", t.nodes().len()).unwrap();
            for node in t.nodes() {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => writeln!(s, "split {feature} {threshold:e} {left} {right}").unwrap(),
                    Node::Leaf { value } => writeln!(s, "leaf {value:e}").unwrap(),
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| -> Result<Vec<&str>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(format!("missing {what}")))?;
            Ok(line.split_whitespace().collect())
        };
        let header = next("header")?;
        if header != ["gb-model", "1"] {
            return Err(Error::parse("not a gb-model version 1 file"));
        }
        let n_features: usize = keyed(&next("n_features")?, "n_features")?;
        let init_prediction: f64 = keyed(&next("init_prediction")?, "init_prediction")?;
        let learning_rate: f64 = keyed(&next("learning_rate")?, "learning_rate")?;
        let huber_alpha: f64 = keyed(&next("huber_alpha")?, "huber_alpha")?;
        let n_trees: usize = keyed(&next("n_trees")?, "n_trees")?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes: usize = keyed(&next("tree")?, "tree")?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let f = next("node")?;
                let node = match f.as_slice() {
                    ["split", feature, threshold, left, right] => Node::Split {
                        feature: num(feature)?,
                        threshold: num(threshold)?,
                        left: num(left)?,
                        right: num(right)?,
                    },
                    ["leaf", value] => Node::Leaf { value: num(value)? },
                    _ => return Err(Error::parse(format!("bad node line: {}", f.join(" ")))),
                };
                if let Node::Split { feature, .. } = node {
                    if feature as usize >= n_features {
                        return Err(Error::parse(format!("feature {feature} out of range")));
                    }
                }
                nodes.push(node);
            }
            trees.push(
                RegressionTree::from_nodes(nodes)
                    .ok_or_else(|| Error::parse("malformed tree links"))?,
            );
        }
        Ok(GbModel {
            n_features,
            init_prediction,
            learning_rate,
            huber_alpha,
            trees,
        })
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(format!("invalid number '{s}'")))
}

fn keyed<T: std::str::FromStr>(fields: &[&str], key: &str) -> Result<T> {
    match fields {
        [k, v] if *k == key => num(v),
        _ => Err(Error::parse(format!("expected '{key} <value>'"))),
    }
}

impl Predictor for GbModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_features, "feature count mismatch");
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.init_prediction + self.learning_rate * sum
    }
}

pub fn predict_gb(m: &GbModel, x: &[f64]) -> Result<f64> {
    check_dim(m.n_features, x.len())?;
    Ok(m.predict_row(x))
}

pub fn train_gb(x: &[Vec<f64>], y: &[f64], p: &GbParams) -> Result<GbModel> {
    train_gb_traced(x, y, p).map(|(m, _)| m)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Trains a model and returns the mean huber training loss after each
/// stage, measured with that stage's threshold.
///
/// Rows are put in a canonical order (by target, then features) before
/// fitting, so the result does not depend on the order of the input rows.
pub fn train_gb_traced(x: &[Vec<f64>], y: &[f64], p: &GbParams) -> Result<(GbModel, Vec<f64>)> {
    p.validate()?;
    let d = validate_training_set(x, y, 1)?;

    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then_with(|| lex_cmp(&x[a], &x[b])));
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let n = ys.len();

    let features = RankedFeatures::new(&xs);
    let grow_params = GrowParams {
        max_depth: p.max_depth,
        min_samples_split: p.min_samples_split,
    };
    let init = median(&ys);
    let mut raw = vec![init; n];
    let mut residual = vec![0.0; n];
    let mut pseudo = vec![0.0; n];
    let mut abs_res = vec![0.0; n];
    let mut trees = Vec::with_capacity(p.n_stages);
    let mut history = Vec::with_capacity(p.n_stages);

    for _ in 0..p.n_stages {
        for i in 0..n {
            residual[i] = ys[i] - raw[i];
            abs_res[i] = residual[i].abs();
        }
        let delta = quantile(&abs_res, p.huber_alpha).max(MIN_DELTA);
        for i in 0..n {
            pseudo[i] = huber_loss(residual[i], delta).1;
        }
        let (tree, leaf_of_row) = grow(&features, &pseudo, &grow_params, |rows| {
            let r: Vec<f64> = rows.iter().map(|&i| residual[i as usize]).collect();
            let med = median(&r);
            let clipped: f64 = r.iter().map(|v| (v - med).clamp(-delta, delta)).sum();
            med + clipped / r.len() as f64
        });
        let mut loss = 0.0;
        for i in 0..n {
            raw[i] += p.learning_rate * leaf_of_row[i];
            loss += huber_loss(ys[i] - raw[i], delta).0;
        }
        history.push(loss / n as f64);
        trees.push(tree);
    }

    let model = GbModel {
        n_features: d,
        init_prediction: init,
        learning_rate: p.learning_rate,
        huber_alpha: p.huber_alpha,
        trees,
    };
    Ok((model, history))
}
