//! Self-organising feature map on a rectangular grid.
//!
//! Neurons are stored row-major; neuron `k` sits at `(k / width, k % width)`.
//! The observation-to-neuron dissimilarity is any [`Metric`]; when the metric
//! exposes a scalar projection, neuron projections are cached and refreshed
//! after each update.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clustering::Labeling;
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::rng::{sample_indices, stream, stream_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SofmGrid {
    width: usize,
    height: usize,
    dim: usize,
    weights: Vec<Vec<f64>>,
}

impl SofmGrid {
    pub fn from_weights(width: usize, height: usize, weights: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 || weights.len() != width * height {
            return Err(Error::domain(format!(
                "{width}x{height} grid needs {} weight vectors, got {}",
                width * height,
                weights.len()
            )));
        }
        let dim = weights[0].len();
        if dim == 0 || weights.iter().any(|w| w.len() != dim) {
            return Err(Error::domain(
                "neuron weight vectors must share a non-zero length",
            ));
        }
        Ok(SofmGrid {
            width,
            height,
            dim,
            weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_neurons(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> &[f64] {
        &self.weights[row * self.width + col]
    }

    pub fn position(&self, neuron: usize) -> (usize, usize) {
        (neuron / self.width, neuron % self.width)
    }

    /// Order-sensitive FNV-1a hash of the weight bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for w in self.weights.iter().flatten() {
            for b in w.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SofmParams {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    /// Defaults to `max(width, height) / 2` when absent.
    pub radius_start: Option<f64>,
    pub radius_end: f64,
    pub seed: u64,
}

impl Default for SofmParams {
    fn default() -> Self {
        SofmParams {
            width: 8,
            height: 8,
            epochs: 3,
            alpha_start: 0.5,
            alpha_end: 0.01,
            radius_start: None,
            radius_end: 0.5,
            seed: 42,
        }
    }
}

impl SofmParams {
    pub fn radius_start(&self) -> f64 {
        self.radius_start
            .unwrap_or(self.width.max(self.height) as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config(
                "sofm grid must have positive width and height",
            ));
        }
        if self.epochs == 0 {
            return Err(Error::config("sofm epochs must be at least 1"));
        }
        if !(self.alpha_end > 0.0 && self.alpha_start >= self.alpha_end && self.alpha_start <= 1.0)
        {
            return Err(Error::config(
                "sofm needs 0 < alpha_end <= alpha_start <= 1",
            ));
        }
        if !(self.radius_end > 0.0 && self.radius_start() >= self.radius_end) {
            return Err(Error::config("sofm needs 0 < radius_end <= radius_start"));
        }
        Ok(())
    }
}

/// Neuron weights drawn from the inputs without replacement.
pub fn init_grid<P: AsRef<[f64]>>(
    genomes: &[P],
    width: usize,
    height: usize,
    seed: u64,
) -> Result<SofmGrid> {
    let k = width * height;
    if k == 0 {
        return Err(Error::domain("grid must have at least one neuron"));
    }
    if genomes.len() < k {
        return Err(Error::domain(format!(
            "{width}x{height} grid needs at least {k} inputs, got {}",
            genomes.len()
        )));
    }
    let mut rng = stream_rng(seed, stream::SOFM_INIT);
    let mut picks = sample_indices(&mut rng, genomes.len(), k);
    // sample_indices sorts; restore a seeded placement on the grid
    picks.shuffle(&mut rng);
    let weights = picks
        .iter()
        .map(|&i| genomes[i].as_ref().to_vec())
        .collect();
    SofmGrid::from_weights(width, height, weights)
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, v) in values.enumerate() {
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Neuron closest to `x`; ties go to the smallest row-major index.
pub fn best_matching_unit(grid: &SofmGrid, x: &[f64], metric: &dyn Metric) -> (usize, usize) {
    let k = argmin(grid.weights.iter().map(|w| metric.distance(w, x)));
    grid.position(k)
}

/// Finds BMUs, using cached projections when the metric is one-dimensional.
struct BmuSearch<'a> {
    metric: &'a dyn Metric,
    projections: Option<Vec<f64>>,
}

impl<'a> BmuSearch<'a> {
    fn new(grid: &SofmGrid, metric: &'a dyn Metric) -> Self {
        let projections = grid
            .weights
            .iter()
            .map(|w| metric.projection(w))
            .collect::<Option<Vec<f64>>>();
        BmuSearch {
            metric,
            projections,
        }
    }

    fn find(&self, grid: &SofmGrid, x: &[f64]) -> usize {
        match (&self.projections, self.metric.projection(x)) {
            (Some(p), Some(px)) => argmin(p.iter().map(|v| (v - px).abs())),
            _ => argmin(grid.weights.iter().map(|w| self.metric.distance(w, x))),
        }
    }

    fn refresh(&mut self, grid: &SofmGrid) {
        if let Some(p) = &mut self.projections {
            for (slot, w) in p.iter_mut().zip(&grid.weights) {
                *slot = self.metric.projection(w).expect("projection available");
            }
        }
    }
}

/// One Kohonen step: every neuron moves toward `x` by
/// `alpha · exp(−g² / 2r²)`, with `g` the grid distance to the BMU.
pub fn kohonen_update(grid: &mut SofmGrid, x: &[f64], bmu: usize, alpha: f64, radius: f64) {
    let (br, bc) = grid.position(bmu);
    let two_r2 = 2.0 * radius * radius;
    let width = grid.width;
    for (k, w) in grid.weights.iter_mut().enumerate() {
        let (r, c) = (k / width, k % width);
        let g2 = (r as f64 - br as f64).powi(2) + (c as f64 - bc as f64).powi(2);
        let rate = alpha * (-g2 / two_r2).exp();
        if rate == 0.0 {
            continue;
        }
        for (wi, xi) in w.iter_mut().zip(x) {
            *wi += rate * (xi - *wi);
        }
    }
}

/// Trains from a seeded initial grid.
pub fn fit<P: AsRef<[f64]>>(
    genomes: &[P],
    params: &SofmParams,
    metric: &dyn Metric,
) -> Result<SofmGrid> {
    params.validate()?;
    let grid = init_grid(genomes, params.width, params.height, params.seed)?;
    fit_from(grid, genomes, params, metric)
}

/// Trains an existing grid. Each epoch presents all inputs in a seeded
/// shuffled order; learning rate and radius fall linearly per presentation.
pub fn fit_from<P: AsRef<[f64]>>(
    mut grid: SofmGrid,
    genomes: &[P],
    params: &SofmParams,
    metric: &dyn Metric,
) -> Result<SofmGrid> {
    params.validate()?;
    if genomes.is_empty() {
        return Err(Error::domain("cannot fit a map to no inputs"));
    }
    if genomes.iter().any(|g| g.as_ref().len() != grid.dim) {
        return Err(Error::domain(format!(
            "inputs must have {} components",
            grid.dim
        )));
    }
    let total = params.epochs * genomes.len();
    let (a0, a1) = (params.alpha_start, params.alpha_end);
    let (r0, r1) = (params.radius_start(), params.radius_end);
    let mut rng = stream_rng(params.seed, stream::SOFM_ORDER);
    let mut order: Vec<usize> = (0..genomes.len()).collect();
    let mut search = BmuSearch::new(&grid, metric);
    let mut t = 0usize;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let frac = if total > 1 {
                t as f64 / (total - 1) as f64
            } else {
                0.0
            };
            let alpha = a0 + (a1 - a0) * frac;
            let radius = r0 + (r1 - r0) * frac;
            let x = genomes[i].as_ref();
            let bmu = search.find(&grid, x);
            kohonen_update(&mut grid, x, bmu, alpha, radius);
            search.refresh(&grid);
            t += 1;
        }
    }
    Ok(grid)
}

/// Cluster id = row-major index of each input's BMU, renumbered to the
/// occupied neurons in ascending neuron order.
pub fn assign_clusters<P: AsRef<[f64]>>(
    grid: &SofmGrid,
    genomes: &[P],
    metric: &dyn Metric,
) -> Labeling {
    let neurons = assign_neurons(grid, genomes, metric);
    neuron_labeling(grid, &neurons)
}

/// Raw BMU index of each input.
pub fn assign_neurons<P: AsRef<[f64]>>(
    grid: &SofmGrid,
    genomes: &[P],
    metric: &dyn Metric,
) -> Vec<usize> {
    let search = BmuSearch::new(grid, metric);
    genomes
        .iter()
        .map(|g| search.find(grid, g.as_ref()))
        .collect()
}

pub(crate) fn neuron_labeling(grid: &SofmGrid, neurons: &[usize]) -> Labeling {
    let mut occupied = vec![false; grid.n_neurons()];
    for &n in neurons {
        occupied[n] = true;
    }
    let mut rank = vec![0u32; grid.n_neurons()];
    let mut next = 0;
    for (k, occ) in occupied.iter().enumerate() {
        if *occ {
            rank[k] = next;
            next += 1;
        }
    }
    Labeling::new(neurons.iter().map(|&n| Some(rank[n])).collect())
        .expect("contiguous by construction")
}

/// Evaluates every neuron's weight vector, row-major.
pub fn neuron_oip(grid: &SofmGrid, evaluator: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    grid.weights.iter().map(|w| evaluator(w)).collect()
}
