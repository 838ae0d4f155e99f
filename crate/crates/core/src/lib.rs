//! Reduction of geological model ensembles to a small representative subset.
//!
//! A geological model is a genome: three property genes (water saturation,
//! net-to-gross, porosity), each a sequence of trend knot points. The crate
//! enumerates the full ensemble of allele combinations, evaluates oil in place
//! (OIP) for it, clusters models with a histogram gold standard, DBSCAN and a
//! self-organising feature map (SOFM), and approximates OIP with gradient
//! boosted trees or a small MLP. The semi-supervised reduction fits a SOFM
//! under a metric given by regressor-predicted OIP and keeps one model per
//! occupied neuron.

pub mod clustering;
pub mod config;
pub mod error;
pub mod genome;
pub mod io;
pub mod metric;
pub mod oilfield;
pub mod pipeline;
pub mod regress;
pub mod rng;
pub mod sofm;

pub use error::{Error, Result};
