//! Semi-supervised ensemble reduction.
//!
//! Only a random sample of models is evaluated with the oracle. A GB
//! regressor trained on that sample predicts OIP for the whole ensemble, and
//! a SOFM fitted under `d(x, y) = |ĝ(x) − ĝ(y)|` groups models by expected
//! behaviour. One representative per occupied neuron is kept.
//!
//! [`reduce_blind`] runs every step that may not see true OIP outside the
//! sample; [`semi_supervised_reduce`] adds the evaluation against the
//! histogram gold standard and a Euclidean-metric SOFM.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    cluster_oip_spread, compare_labelings, equi_width_histogram, Labeling, SpreadSummary,
};
use crate::error::{Error, Result};
use crate::genome::{ensemble_matrix, ModelId};
use crate::metric::{Euclidean, PredictedMetric};
use crate::oilfield::{generate_gene_library, OilfieldConfig, OipSource, Oracle};
use crate::regress::{error_metrics, train_gb, ErrorMetrics, GbModel, GbParams, Predictor};
use crate::rng::{sample_indices, stream, stream_rng};
use crate::sofm::{self, SofmGrid, SofmParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionConfig {
    pub sample_fraction: f64,
    pub oilfield: OilfieldConfig,
    pub gb: GbParams,
    pub sofm: SofmParams,
    pub n_bins_reference: usize,
    pub seed: u64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            sample_fraction: 0.15,
            oilfield: OilfieldConfig::default(),
            gb: GbParams::default(),
            sofm: SofmParams::default(),
            n_bins_reference: 64,
            seed: 42,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return Err(Error::config("sample_fraction must lie in (0, 1)"));
        }
        if self.n_bins_reference == 0 {
            return Err(Error::config("n_bins_reference must be at least 1"));
        }
        self.oilfield.validate()?;
        self.gb.validate()?;
        self.sofm.validate()
    }
}

/// Number of models evaluated for training: `⌊fraction · n⌋`.
pub fn sample_size(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).floor() as usize
}

/// Seeded sample of model ids, ascending.
pub fn draw_sample(seed: u64, fraction: f64, n: usize) -> Result<Vec<ModelId>> {
    let k = sample_size(fraction, n);
    if k < 2 {
        return Err(Error::domain(format!(
            "sample fraction {fraction} of {n} models gives {k} training models; need at least 2"
        )));
    }
    let idx = sample_indices(&mut stream_rng(seed, stream::SAMPLE), n, k);
    idx.into_iter().map(ModelId::new).collect()
}

/// Records every id the wrapped oracle is asked about.
pub struct CountingOracle<'a> {
    inner: &'a dyn OipSource,
    calls: Mutex<Vec<ModelId>>,
}

impl<'a> CountingOracle<'a> {
    pub fn new(inner: &'a dyn OipSource) -> Self {
        CountingOracle {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Ids evaluated so far, in call order.
    pub fn calls(&self) -> Vec<ModelId> {
        self.calls.lock().expect("oracle log poisoned").clone()
    }
}

impl OipSource for CountingOracle<'_> {
    fn evaluate(&self, id: ModelId) -> f64 {
        self.calls.lock().expect("oracle log poisoned").push(id);
        self.inner.evaluate(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub id: ModelId,
    pub cluster: u32,
    pub predicted_oip: f64,
}

/// Outcome of the steps that only see sampled OIP.
#[derive(Debug, Clone)]
pub struct BlindReduction {
    pub sample_ids: Vec<ModelId>,
    pub sample_oip: Vec<f64>,
    pub model: GbModel,
    /// Predicted OIP of every model, by id.
    pub predicted: Vec<f64>,
    pub grid: SofmGrid,
    pub labeling: Labeling,
    pub representatives: Vec<Representative>,
}

/// Per cluster, the member whose predicted OIP is closest to the cluster's
/// median prediction; ties go to the lower id.
pub fn select_representatives(labeling: &Labeling, predicted: &[f64]) -> Vec<Representative> {
    labeling
        .members()
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, members)| {
            let values: Vec<f64> = members.iter().map(|&i| predicted[i]).collect();
            let med = crate::regress::median(&values);
            let mut best = members[0];
            let mut best_d = f64::INFINITY;
            for &i in members {
                let d = (predicted[i] - med).abs();
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            Representative {
                id: ModelId::new(best).expect("member index is a model id"),
                cluster: c as u32,
                predicted_oip: predicted[best],
            }
        })
        .collect()
}

/// Sampling, training, prediction, SOFM fit, clustering and representative
/// selection. `oracle` is consulted for the sampled ids only.
pub fn reduce_blind(
    cfg: &ReductionConfig,
    genomes: &[Vec<f64>],
    oracle: &dyn OipSource,
) -> Result<BlindReduction> {
    cfg.validate()?;
    let sample_ids = draw_sample(cfg.seed, cfg.sample_fraction, genomes.len())?;
    let sample_oip: Vec<f64> = sample_ids.iter().map(|&id| oracle.evaluate(id)).collect();
    let sample_x: Vec<Vec<f64>> = sample_ids
        .iter()
        .map(|id| genomes[id.get()].clone())
        .collect();
    let model = train_gb(&sample_x, &sample_oip, &cfg.gb)?;
    let predicted: Vec<f64> = genomes.par_iter().map(|g| model.predict_row(g)).collect();

    let metric = PredictedMetric::new(&model);
    let grid = sofm::fit(genomes, &cfg.sofm, &metric)?;
    let labeling = sofm::assign_clusters(&grid, genomes, &metric);
    let representatives = select_representatives(&labeling, &predicted);
    Ok(BlindReduction {
        sample_ids,
        sample_oip,
        model,
        predicted,
        grid,
        labeling,
        representatives,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRepresentative {
    pub id: ModelId,
    pub cluster: u32,
    pub predicted_oip: f64,
    pub true_oip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub config: ReductionConfig,
    pub n_models: usize,
    pub sample_ids: Vec<ModelId>,
    pub representatives: Vec<ReportRepresentative>,
    /// Fraction of the ensemble kept.
    pub reduction_ratio: f64,
    /// Cluster of each model by id.
    pub clusters: Vec<i64>,
    pub n_clusters: usize,
    /// GB error on the models outside the sample.
    pub holdout_error: ErrorMetrics,
    pub rand_vs_gold: f64,
    pub rand_vs_euclidean_sofm: f64,
    pub euclidean_sofm_rand_vs_gold: f64,
    pub predicted_spread: SpreadSummary,
    pub true_spread: SpreadSummary,
    pub euclidean_sofm_true_spread: SpreadSummary,
    pub gold_true_spread: SpreadSummary,
}

impl ReductionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("report.json: {e}")))
    }
}

/// Full reduction plus everything produced along the way.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub blind: BlindReduction,
    pub truth: Vec<f64>,
    pub gold: Labeling,
    pub euclidean_grid: SofmGrid,
    pub euclidean_labeling: Labeling,
    pub report: ReductionReport,
}

/// Generates the ensemble from `cfg.oilfield` and runs the reduction.
pub fn semi_supervised_reduce(cfg: &ReductionConfig) -> Result<Reduction> {
    cfg.validate()?;
    let lib = generate_gene_library(&cfg.oilfield);
    let genomes = ensemble_matrix(&lib);
    let oracle = Oracle::new(&lib, &cfg.oilfield);
    reduce_ensemble(cfg, &genomes, &oracle)
}

/// Runs [`reduce_blind`], then evaluates the result against the true OIP
/// of every model.
pub fn reduce_ensemble(
    cfg: &ReductionConfig,
    genomes: &[Vec<f64>],
    oracle: &dyn OipSource,
) -> Result<Reduction> {
    let blind = reduce_blind(cfg, genomes, oracle)?;

    let truth: Vec<f64> = (0..genomes.len())
        .into_par_iter()
        .map(|i| ModelId::new(i).map(|id| oracle.evaluate(id)))
        .collect::<Result<_>>()?;
    let gold = equi_width_histogram(&truth, cfg.n_bins_reference)?.labeling;
    let euclidean_grid = sofm::fit(genomes, &cfg.sofm, &Euclidean)?;
    let euclidean_labeling = sofm::assign_clusters(&euclidean_grid, genomes, &Euclidean);

    let mut in_sample = vec![false; genomes.len()];
    for id in &blind.sample_ids {
        in_sample[id.get()] = true;
    }
    let (holdout_true, holdout_pred): (Vec<f64>, Vec<f64>) = (0..genomes.len())
        .filter(|&i| !in_sample[i])
        .map(|i| (truth[i], blind.predicted[i]))
        .unzip();

    let representatives = blind
        .representatives
        .iter()
        .map(|r| ReportRepresentative {
            id: r.id,
            cluster: r.cluster,
            predicted_oip: r.predicted_oip,
            true_oip: truth[r.id.get()],
        })
        .collect::<Vec<_>>();

    let report = ReductionReport {
        config: cfg.clone(),
        n_models: genomes.len(),
        sample_ids: blind.sample_ids.clone(),
        reduction_ratio: representatives.len() as f64 / genomes.len() as f64,
        representatives,
        clusters: blind.labeling.to_signed(),
        n_clusters: blind.labeling.n_clusters(),
        holdout_error: error_metrics(&holdout_true, &holdout_pred)?,
        rand_vs_gold: compare_labelings(&blind.labeling, &gold)?,
        rand_vs_euclidean_sofm: compare_labelings(&blind.labeling, &euclidean_labeling)?,
        euclidean_sofm_rand_vs_gold: compare_labelings(&euclidean_labeling, &gold)?,
        predicted_spread: cluster_oip_spread(&blind.labeling, &blind.predicted)?,
        true_spread: cluster_oip_spread(&blind.labeling, &truth)?,
        euclidean_sofm_true_spread: cluster_oip_spread(&euclidean_labeling, &truth)?,
        gold_true_spread: cluster_oip_spread(&gold, &truth)?,
    };
    Ok(Reduction {
        blind,
        truth,
        gold,
        euclidean_grid,
        euclidean_labeling,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_size_at_fifteen_percent() {
        assert_eq!(sample_size(0.15, 13824), 2073);
        let ids = draw_sample(42, 0.15, 13824).unwrap();
        assert_eq!(ids.len(), 2073);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ids, draw_sample(42, 0.15, 13824).unwrap());
    }

    #[test]
    fn tiny_sample_is_rejected() {
        assert!(matches!(
            draw_sample(1, 0.0001, 13824),
            Err(Error::Domain(_))
        ));
        let cfg = ReductionConfig {
            sample_fraction: 0.0001,
            ..Default::default()
        };
        assert!(semi_supervised_reduce(&cfg).is_err());
    }

    #[test]
    fn representative_is_closest_to_median() {
        let l = Labeling::new(vec![Some(0), Some(0), Some(0), Some(1), Some(1)]).unwrap();
        let pred = [1.0, 5.0, 2.0, 7.0, 9.0];
        let reps = select_representatives(&l, &pred);
        assert_eq!(reps.len(), 2);
        assert_eq!(reps[0].id.get(), 2);
        // median 8.0 is equidistant from both; lower id wins
        assert_eq!(reps[1].id.get(), 3);
        assert_eq!(reps[1].cluster, 1);
    }

    #[test]
    fn config_validation() {
        assert!(ReductionConfig::default().validate().is_ok());
        for bad in [0.0, 1.0, -0.1] {
            let cfg = ReductionConfig {
                sample_fraction: bad,
                ..Default::default()
            };
            assert!(cfg.validate().is_err());
        }
    }
}
