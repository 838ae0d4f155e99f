//! Synthetic oilfield: a seeded gene library and the volumetric OIP oracle
//! that stands in for a full reservoir evaluation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{
    alleles_to_id, id_to_alleles, Alleles, Gene, GeneLibrary, ModelId, Property, ENSEMBLE_SIZE,
    GENE_LEN, N_ALLELES, N_PROPERTIES,
};
use crate::rng::stream_rng;

pub const MIN_FRACTION: f64 = 0.01;
pub const MAX_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyBases {
    pub sw: f64,
    pub ntg: f64,
    pub phi: f64,
}

impl PropertyBases {
    pub fn get(&self, p: Property) -> f64 {
        match p {
            Property::Sw => self.sw,
            Property::Ntg => self.ntg,
            Property::Phi => self.phi,
        }
    }
}

impl Default for PropertyBases {
    fn default() -> Self {
        PropertyBases {
            sw: 0.30,
            ntg: 0.60,
            phi: 0.20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OilfieldConfig {
    pub seed: u64,
    pub n_properties: usize,
    pub n_alleles: usize,
    /// Standard deviation of each random-walk step between knots.
    pub knot_step_sigma: f64,
    /// Barrels; absorbs gross rock volume and formation volume factor.
    pub volume_constant: f64,
    pub property_bases: PropertyBases,
    /// Standard deviation of the per-gene starting offset.
    pub base_jitter_sigma: f64,
}

impl Default for OilfieldConfig {
    fn default() -> Self {
        OilfieldConfig {
            seed: 42,
            n_properties: N_PROPERTIES,
            n_alleles: N_ALLELES,
            knot_step_sigma: 0.05,
            volume_constant: 1.9e9,
            property_bases: PropertyBases::default(),
            base_jitter_sigma: 0.08,
        }
    }
}

impl OilfieldConfig {
    pub fn with_seed(seed: u64) -> Self {
        OilfieldConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_properties != N_PROPERTIES {
            return Err(Error::config(format!(
                "n_properties must be {N_PROPERTIES}, got {}",
                self.n_properties
            )));
        }
        if self.n_alleles != N_ALLELES {
            return Err(Error::config(format!(
                "n_alleles must be {N_ALLELES}, got {}",
                self.n_alleles
            )));
        }
        if !(self.knot_step_sigma > 0.0 && self.knot_step_sigma.is_finite()) {
            return Err(Error::config("knot_step_sigma must be positive"));
        }
        if !(self.base_jitter_sigma >= 0.0 && self.base_jitter_sigma.is_finite()) {
            return Err(Error::config("base_jitter_sigma must be non-negative"));
        }
        if !(self.volume_constant > 0.0 && self.volume_constant.is_finite()) {
            return Err(Error::config("volume_constant must be positive"));
        }
        for p in Property::ALL {
            let b = self.property_bases.get(p);
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(format!(
                    "property base for {p} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Clamped effective property fractions of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveProperties {
    pub sw_eff: f64,
    pub ntg_eff: f64,
    pub phi_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OipLabel {
    pub id: ModelId,
    pub oip: f64,
}

/// Draws each gene as a random walk over its knots. The walk for
/// (property, allele) comes from its own ChaCha stream, so genes can be
/// generated in any order with identical results.
pub fn generate_gene_library(cfg: &OilfieldConfig) -> GeneLibrary {
    let mut genes = Vec::with_capacity(N_PROPERTIES * N_ALLELES);
    for p in Property::ALL {
        for allele in 0..N_ALLELES {
            let stream = (p.index() * N_ALLELES + allele) as u64;
            let mut rng = stream_rng(cfg.seed, stream);
            let mut knots = Vec::with_capacity(GENE_LEN);
            let z: f64 = rng.sample(StandardNormal);
            let mut knot = z * cfg.base_jitter_sigma;
            knots.push(knot);
            for _ in 1..GENE_LEN {
                let z: f64 = rng.sample(StandardNormal);
                knot += z * cfg.knot_step_sigma;
                knots.push(knot);
            }
            genes.push(Gene::new(p, allele, knots).expect("generated gene is well formed"));
        }
    }
    GeneLibrary::new(genes).expect("generated library is complete")
}

/// `clamp(base + mean(knots), 0.01, 0.99)`.
pub fn effective_property(gene: &Gene, cfg: &OilfieldConfig) -> f64 {
    let knots = gene.knots();
    let mean = knots.iter().sum::<f64>() / knots.len() as f64;
    (cfg.property_bases.get(gene.property()) + mean).clamp(MIN_FRACTION, MAX_FRACTION)
}

pub fn effective_properties(
    a: Alleles,
    lib: &GeneLibrary,
    cfg: &OilfieldConfig,
) -> EffectiveProperties {
    let eff = |p: Property| effective_property(lib.gene(p, a.get(p)), cfg);
    EffectiveProperties {
        sw_eff: eff(Property::Sw),
        ntg_eff: eff(Property::Ntg),
        phi_eff: eff(Property::Phi),
    }
}

fn volumetric(volume: f64, e: EffectiveProperties) -> f64 {
    volume * e.ntg_eff * e.phi_eff * (1.0 - e.sw_eff)
}

/// Volumetric OIP: `V · ntg · phi · (1 − sw)`.
pub fn oip_oracle(a: Alleles, lib: &GeneLibrary, cfg: &OilfieldConfig) -> OipLabel {
    OipLabel {
        id: alleles_to_id(a),
        oip: volumetric(cfg.volume_constant, effective_properties(a, lib, cfg)),
    }
}

/// Labels for every model, ordered by id.
pub fn evaluate_ensemble(lib: &GeneLibrary, cfg: &OilfieldConfig) -> Vec<OipLabel> {
    let oracle = Oracle::new(lib, cfg);
    (0..ENSEMBLE_SIZE)
        .into_par_iter()
        .map(|i| {
            let id = ModelId::new(i).expect("id in range");
            OipLabel {
                id,
                oip: oracle.evaluate(id),
            }
        })
        .collect()
}

/// Anything that can produce the true OIP of a model.
pub trait OipSource: Sync {
    fn evaluate(&self, id: ModelId) -> f64;
}

/// The volumetric oracle with effective properties cached per gene.
#[derive(Debug, Clone)]
pub struct Oracle {
    volume: f64,
    effective: [[f64; N_ALLELES]; N_PROPERTIES],
}

impl Oracle {
    pub fn new(lib: &GeneLibrary, cfg: &OilfieldConfig) -> Self {
        let mut effective = [[0.0; N_ALLELES]; N_PROPERTIES];
        for p in Property::ALL {
            for (a, slot) in effective[p.index()].iter_mut().enumerate() {
                *slot = effective_property(lib.gene(p, a), cfg);
            }
        }
        Oracle {
            volume: cfg.volume_constant,
            effective,
        }
    }
}

impl OipSource for Oracle {
    fn evaluate(&self, id: ModelId) -> f64 {
        let a = id_to_alleles(id);
        let e = EffectiveProperties {
            sw_eff: self.effective[0][a.sw as usize],
            ntg_eff: self.effective[1][a.ntg as usize],
            phi_eff: self.effective[2][a.phi as usize],
        };
        volumetric(self.volume, e)
    }
}
