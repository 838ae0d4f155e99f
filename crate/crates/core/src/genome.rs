//! Genes, alleles, genomes and sequential model ids.
//!
//! A gene holds the knot points of one property along four trends, laid out
//! as depth (3), stratigraphy (35), strike (3), dip (3). A model picks one
//! gene per property; the triplet of gene indices (alleles) maps to a
//! sequential id in base `n_alleles`, most significant digit first, with
//! property order (sw, ntg, phi).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEPTH_KNOTS: usize = 3;
pub const STRATIGRAPHY_KNOTS: usize = 35;
pub const STRIKE_KNOTS: usize = 3;
pub const DIP_KNOTS: usize = 3;

/// Knot points per gene.
pub const GENE_LEN: usize = DEPTH_KNOTS + STRATIGRAPHY_KNOTS + STRIKE_KNOTS + DIP_KNOTS;
/// Number of properties per model.
pub const N_PROPERTIES: usize = 3;
/// Knot points per genome.
pub const GENOME_LEN: usize = N_PROPERTIES * GENE_LEN;
/// Candidate genes per property.
pub const N_ALLELES: usize = 24;
/// Size of the full ensemble, `N_ALLELES^3`.
pub const ENSEMBLE_SIZE: usize = N_ALLELES * N_ALLELES * N_ALLELES;

/// Offsets of the trend blocks inside a gene.
pub mod layout {
    use super::*;
    use std::ops::Range;

    pub const DEPTH: Range<usize> = 0..DEPTH_KNOTS;
    pub const STRATIGRAPHY: Range<usize> = DEPTH.end..DEPTH.end + STRATIGRAPHY_KNOTS;
    pub const STRIKE: Range<usize> = STRATIGRAPHY.end..STRATIGRAPHY.end + STRIKE_KNOTS;
    pub const DIP: Range<usize> = STRIKE.end..STRIKE.end + DIP_KNOTS;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Sw,
    Ntg,
    Phi,
}

impl Property {
    pub const ALL: [Property; N_PROPERTIES] = [Property::Sw, Property::Ntg, Property::Phi];

    /// Position of the property in alleles and genomes.
    pub fn index(self) -> usize {
        match self {
            Property::Sw => 0,
            Property::Ntg => 1,
            Property::Phi => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::Sw => "sw",
            Property::Ntg => "ntg",
            Property::Phi => "phi",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One property's knot-point sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Gene {
    property: Property,
    allele: usize,
    knots: Vec<f64>,
}

impl Gene {
    pub fn new(property: Property, allele: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() != GENE_LEN {
            return Err(Error::domain(format!(
                "gene must have {GENE_LEN} knots, got {}",
                knots.len()
            )));
        }
        if allele >= N_ALLELES {
            return Err(Error::domain(format!(
                "allele {allele} out of range [0, {})",
                N_ALLELES
            )));
        }
        Ok(Gene {
            property,
            allele,
            knots,
        })
    }

    pub fn property(&self) -> Property {
        self.property
    }

    pub fn allele(&self) -> usize {
        self.allele
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// Gene choice per property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alleles {
    pub sw: u8,
    pub ntg: u8,
    pub phi: u8,
}

impl Alleles {
    pub fn new(sw: usize, ntg: usize, phi: usize) -> Result<Self> {
        let check = |p: Property, v: usize| -> Result<u8> {
            if v < N_ALLELES {
                Ok(v as u8)
            } else {
                Err(Error::domain(format!(
                    "{p} allele {v} out of range [0, {N_ALLELES})"
                )))
            }
        };
        Ok(Alleles {
            sw: check(Property::Sw, sw)?,
            ntg: check(Property::Ntg, ntg)?,
            phi: check(Property::Phi, phi)?,
        })
    }

    pub fn get(&self, property: Property) -> usize {
        match property {
            Property::Sw => self.sw as usize,
            Property::Ntg => self.ntg as usize,
            Property::Phi => self.phi as usize,
        }
    }
}

/// Sequential model id in `[0, ENSEMBLE_SIZE)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(u32);

impl ModelId {
    pub fn new(id: usize) -> Result<Self> {
        if id < ENSEMBLE_SIZE {
            Ok(ModelId(id as u32))
        } else {
            Err(Error::domain(format!(
                "model id {id} out of range [0, {ENSEMBLE_SIZE})"
            )))
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `id = sw·24² + ntg·24 + phi`.
pub fn alleles_to_id(a: Alleles) -> ModelId {
    let n = N_ALLELES as u32;
    ModelId(a.sw as u32 * n * n + a.ntg as u32 * n + a.phi as u32)
}

pub fn id_to_alleles(m: ModelId) -> Alleles {
    let n = N_ALLELES as u32;
    let id = m.0;
    Alleles {
        sw: (id / (n * n)) as u8,
        ntg: (id / n % n) as u8,
        phi: (id % n) as u8,
    }
}

/// Concatenated sw ∥ ntg ∥ phi knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome(Vec<f64>);

impl Genome {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != GENOME_LEN {
            return Err(Error::domain(format!(
                "genome must have {GENOME_LEN} values, got {}",
                values.len()
            )));
        }
        Ok(Genome(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Knots belonging to one property.
    pub fn gene_slice(&self, property: Property) -> &[f64] {
        let start = property.index() * GENE_LEN;
        &self.0[start..start + GENE_LEN]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Genome {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Every candidate gene, indexed by (property, allele).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneLibrary {
    genes: Vec<Gene>,
}

impl GeneLibrary {
    /// Builds a library from genes in any order; every (property, allele)
    /// slot must be filled exactly once.
    pub fn new(genes: Vec<Gene>) -> Result<Self> {
        let mut slots: Vec<Option<Gene>> = vec![None; N_PROPERTIES * N_ALLELES];
        for gene in genes {
            let slot = &mut slots[gene.property.index() * N_ALLELES + gene.allele];
            if slot.is_some() {
                return Err(Error::domain(format!(
                    "duplicate gene {}[{}]",
                    gene.property, gene.allele
                )));
            }
            *slot = Some(gene);
        }
        let mut out = Vec::with_capacity(slots.len());
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(g) => out.push(g),
                None => {
                    return Err(Error::domain(format!(
                        "missing gene {}[{}]",
                        Property::ALL[i / N_ALLELES],
                        i % N_ALLELES
                    )))
                }
            }
        }
        Ok(GeneLibrary { genes: out })
    }

    /// Library where every knot is zero.
    pub fn zeros() -> Self {
        Self::from_fn(|_, _, _| 0.0)
    }

    /// Builds a library from `f(property, allele, knot_index)`.
    pub fn from_fn(mut f: impl FnMut(Property, usize, usize) -> f64) -> Self {
        let mut genes = Vec::with_capacity(N_PROPERTIES * N_ALLELES);
        for p in Property::ALL {
            for a in 0..N_ALLELES {
                let knots = (0..GENE_LEN).map(|j| f(p, a, j)).collect();
                genes.push(Gene {
                    property: p,
                    allele: a,
                    knots,
                });
            }
        }
        GeneLibrary { genes }
    }

    pub fn gene(&self, property: Property, allele: usize) -> &Gene {
        &self.genes[property.index() * N_ALLELES + allele]
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

pub fn assemble_genome(lib: &GeneLibrary, a: Alleles) -> Genome {
    let mut values = Vec::with_capacity(GENOME_LEN);
    for p in Property::ALL {
        values.extend_from_slice(lib.gene(p, a.get(p)).knots());
    }
    Genome(values)
}

/// All `ENSEMBLE_SIZE` models in ascending id order.
pub fn enumerate_ensemble(lib: &GeneLibrary) -> Vec<(ModelId, Genome)> {
    (0..ENSEMBLE_SIZE)
        .map(|i| {
            let id = ModelId(i as u32);
            (id, assemble_genome(lib, id_to_alleles(id)))
        })
        .collect()
}

/// Genome values of the whole ensemble as rows, ascending id.
pub fn ensemble_matrix(lib: &GeneLibrary) -> Vec<Vec<f64>> {
    enumerate_ensemble(lib)
        .into_iter()
        .map(|(_, g)| g.into_values())
        .collect()
}
