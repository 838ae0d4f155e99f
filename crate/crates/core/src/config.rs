//! Experiment configuration document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::DbscanParams;
use crate::error::{Error, Result};
use crate::oilfield::OilfieldConfig;
use crate::pipeline::ReductionConfig;
use crate::regress::{GbParams, MlpParams, SweepParams, TrainParams};
use crate::sofm::SofmParams;

/// Everything a CLI run needs. Every field is optional in the JSON document;
/// unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sample_fraction: f64,
    pub n_bins_reference: usize,
    pub oilfield: OilfieldConfig,
    pub gb: GbParams,
    pub mlp: MlpParams,
    pub sofm: SofmParams,
    pub dbscan: DbscanParams,
    pub sweep: SweepParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            sample_fraction: 0.15,
            n_bins_reference: 64,
            oilfield: OilfieldConfig::default(),
            gb: GbParams::default(),
            mlp: MlpParams::default(),
            sofm: SofmParams::default(),
            dbscan: DbscanParams::default(),
            sweep: SweepParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.reduction().validate()?;
        self.mlp.validate()?;
        self.dbscan.validate()?;
        self.sweep.validate().map_err(|e| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        })
    }

    pub fn reduction(&self) -> ReductionConfig {
        ReductionConfig {
            sample_fraction: self.sample_fraction,
            oilfield: self.oilfield.clone(),
            gb: self.gb.clone(),
            sofm: self.sofm.clone(),
            n_bins_reference: self.n_bins_reference,
            seed: self.seed,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            gb: self.gb.clone(),
            mlp: self.mlp.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_json("{}").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn nested_overrides() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 7, "oilfield": {"seed": 9, "property_bases": {"sw": 0.2, "ntg": 0.5, "phi": 0.25}},
                "gb": {"n_stages": 10}, "sofm": {"radius_start": 3.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.oilfield.seed, 9);
        assert_eq!(cfg.oilfield.property_bases.phi, 0.25);
        assert_eq!(cfg.gb.n_stages, 10);
        assert_eq!(cfg.gb.max_depth, 80);
        assert_eq!(cfg.sofm.radius_start(), 3.0);
    }

    #[test]
    fn unknown_or_invalid_values_are_config_errors() {
        for doc in [
            r#"{"sede": 1}"#,
            r#"{"oilfield": {"volume": 1}}"#,
            r#"{"sample_fraction": 1.5}"#,
            r#"{"gb": {"learning_rate": -1}}"#,
            r#"{"sweep": {"fractions": [0.5, 1.0]}}"#,
            r#"not json"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(doc), Err(Error::Config(_))),
                "{doc}"
            );
        }
    }
}
