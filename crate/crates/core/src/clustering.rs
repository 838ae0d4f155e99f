//! Cluster labelings, the equi-width histogram gold standard, DBSCAN and
//! cluster-quality scores.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;

/// Cluster assignment of each point; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    assignments: Vec<Option<u32>>,
    n_clusters: usize,
}

impl Labeling {
    /// Non-noise ids must form the contiguous range `0..k`.
    pub fn new(assignments: Vec<Option<u32>>) -> Result<Self> {
        let mut used = Vec::new();
        for c in assignments.iter().flatten() {
            let c = *c as usize;
            if c >= used.len() {
                used.resize(c + 1, false);
            }
            used[c] = true;
        }
        if let Some(gap) = used.iter().position(|u| !u) {
            return Err(Error::domain(format!(
                "cluster ids are not contiguous: {gap} unused"
            )));
        }
        Ok(Labeling {
            n_clusters: used.len(),
            assignments,
        })
    }

    /// Renumbers arbitrary cluster keys to `0..k` in order of first
    /// appearance.
    pub fn from_keys<K: std::hash::Hash + Eq>(keys: impl IntoIterator<Item = Option<K>>) -> Self {
        let mut map = HashMap::new();
        let assignments = keys
            .into_iter()
            .map(|k| {
                k.map(|k| {
                    let next = map.len() as u32;
                    *map.entry(k).or_insert(next)
                })
            })
            .collect();
        Labeling {
            assignments,
            n_clusters: map.len(),
        }
    }

    pub fn assignments(&self) -> &[Option<u32>] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_noise(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_none()).count()
    }

    /// Member indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, a) in self.assignments.iter().enumerate() {
            if let Some(c) = a {
                out[*c as usize].push(i);
            }
        }
        out
    }

    /// Serialized cluster ids, noise as −1.
    pub fn to_signed(&self) -> Vec<i64> {
        self.assignments
            .iter()
            .map(|a| a.map_or(-1, |c| c as i64))
            .collect()
    }

    pub fn from_signed(ids: &[i64]) -> Result<Self> {
        let assignments = ids
            .iter()
            .map(|&c| match c {
                -1 => Ok(None),
                c if c >= 0 && c <= u32::MAX as i64 => Ok(Some(c as u32)),
                c => Err(Error::domain(format!("invalid cluster id {c}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Labeling::new(assignments)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramClustering {
    pub n_bins: usize,
    pub edges: Vec<f64>,
    pub labeling: Labeling,
}

/// Assigns each value to one of `n_bins` equal-width bins spanning
/// `[min, max]`. The maximum joins the last bin.
///
/// Bin ids are bin indices, so empty bins leave gaps; the labeling is
/// renumbered to the occupied bins in ascending bin order.
pub fn equi_width_histogram(values: &[f64], n_bins: usize) -> Result<HistogramClustering> {
    if values.is_empty() {
        return Err(Error::domain("histogram of empty input"));
    }
    if n_bins == 0 {
        return Err(Error::domain("n_bins must be at least 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("histogram input must be finite"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n_bins > 1 && max <= min {
        return Err(Error::domain(
            "all values equal; cannot form more than one bin",
        ));
    }
    let width = (max - min) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| min + i as f64 * width).collect();
    edges.push(max);

    let bins: Vec<usize> = values
        .iter()
        .map(|&v| {
            if width == 0.0 {
                return 0;
            }
            let mut b = (((v - min) / width).floor() as usize).min(n_bins - 1);
            // floor() can land one bin off when v sits on a rounded edge
            while b + 1 < n_bins && v >= edges[b + 1] {
                b += 1;
            }
            while b > 0 && v < edges[b] {
                b -= 1;
            }
            b
        })
        .collect();

    let mut occupied = vec![false; n_bins];
    for &b in &bins {
        occupied[b] = true;
    }
    let mut rank = vec![0u32; n_bins];
    let mut next = 0;
    for (b, occ) in occupied.iter().enumerate() {
        if *occ {
            rank[b] = next;
            next += 1;
        }
    }
    let labeling = Labeling::new(bins.iter().map(|&b| Some(rank[b])).collect())?;
    Ok(HistogramClustering {
        n_bins,
        edges,
        labeling,
    })
}

/// Per-bin counts over the raw bin index, including empty bins.
pub fn histogram_counts(values: &[f64], hist: &HistogramClustering) -> Vec<usize> {
    let mut counts = vec![0; hist.n_bins];
    for &v in values {
        let b = hist.edges[1..hist.n_bins].partition_point(|&e| e <= v);
        counts[b] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_samples: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps: 0.6,
            min_samples: 10,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::config("dbscan eps must be positive"));
        }
        if self.min_samples == 0 {
            return Err(Error::config("dbscan min_samples must be at least 1"));
        }
        Ok(())
    }
}

fn neighbours<P: AsRef<[f64]>>(
    points: &[P],
    i: usize,
    eps: f64,
    metric: &dyn Metric,
) -> Vec<usize> {
    let p = points[i].as_ref();
    points
        .iter()
        .enumerate()
        .filter(|(_, q)| metric.distance(p, q.as_ref()) <= eps)
        .map(|(j, _)| j)
        .collect()
}

/// Density-based clustering with neighbourhoods found by full scans.
///
/// A point is core when at least `min_samples` points (itself included) lie
/// within `eps`. Clusters are numbered in the order their first core point is
/// met scanning the input; a border point joins the first cluster whose
/// expansion reaches it.
pub fn dbscan<P>(points: &[P], params: DbscanParams, metric: &dyn Metric) -> Labeling
where
    P: AsRef<[f64]> + Sync,
{
    let eps = params.eps;
    let core: Vec<bool> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let p = points[i].as_ref();
            let mut count = 0;
            for q in points {
                if metric.distance(p, q.as_ref()) <= eps {
                    count += 1;
                    if count >= params.min_samples {
                        return true;
                    }
                }
            }
            false
        })
        .collect();

    let mut labels: Vec<Option<u32>> = vec![None; points.len()];
    let mut n_clusters = 0u32;
    let mut queue = Vec::new();
    for start in 0..points.len() {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        labels[start] = Some(c);
        queue.push(start);
        while let Some(j) = queue.pop() {
            for k in neighbours(points, j, eps, metric) {
                if labels[k].is_none() {
                    labels[k] = Some(c);
                    if core[k] {
                        queue.push(k);
                    }
                }
            }
        }
    }
    Labeling {
        assignments: labels,
        n_clusters: n_clusters as usize,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpread {
    pub cluster: u32,
    pub size: usize,
    pub min: f64,
    pub max: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub clusters: Vec<ClusterSpread>,
    /// Size-weighted mean range over non-noise clusters.
    pub mean_range: f64,
}

/// Range of `oip` within each cluster; noise is excluded.
pub fn cluster_oip_spread(labeling: &Labeling, oip: &[f64]) -> Result<SpreadSummary> {
    if labeling.len() != oip.len() {
        return Err(Error::domain(format!(
            "labeling has {} entries but {} values given",
            labeling.len(),
            oip.len()
        )));
    }
    if labeling.n_clusters() == 0 {
        return Err(Error::domain("labeling has no non-noise clusters"));
    }
    let mut clusters: Vec<ClusterSpread> = (0..labeling.n_clusters())
        .map(|c| ClusterSpread {
            cluster: c as u32,
            size: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            range: 0.0,
        })
        .collect();
    for (a, &v) in labeling.assignments().iter().zip(oip) {
        if let Some(c) = a {
            let s = &mut clusters[*c as usize];
            s.size += 1;
            s.min = s.min.min(v);
            s.max = s.max.max(v);
        }
    }
    let mut weighted = 0.0;
    let mut total = 0;
    for s in &mut clusters {
        s.range = s.max - s.min;
        weighted += s.range * s.size as f64;
        total += s.size;
    }
    Ok(SpreadSummary {
        clusters,
        mean_range: weighted / total as f64,
    })
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Unadjusted Rand index: the fraction of unordered point pairs on which
/// the labelings agree. Each noise point is its own singleton cluster.
pub fn compare_labelings(a: &Labeling, b: &Labeling) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "labelings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Ok(1.0);
    }
    let mut size_a = vec![0u64; a.n_clusters()];
    let mut size_b = vec![0u64; b.n_clusters()];
    let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
    for (x, y) in a.assignments().iter().zip(b.assignments()) {
        if let Some(x) = x {
            size_a[*x as usize] += 1;
        }
        if let Some(y) = y {
            size_b[*y as usize] += 1;
        }
        if let (Some(x), Some(y)) = (x, y) {
            *joint.entry((*x, *y)).or_default() += 1;
        }
    }
    let same_a: u64 = size_a.iter().map(|&s| pairs(s)).sum();
    let same_b: u64 = size_b.iter().map(|&s| pairs(s)).sum();
    let same_both: u64 = joint.values().map(|&s| pairs(s)).sum();
    let total = pairs(n);
    let diff_both = total + same_both - same_a - same_b;
    Ok((same_both + diff_both) as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Euclidean, FnMetric};
    use proptest::prelude::*;

    fn lab(ids: &[i64]) -> Labeling {
        Labeling::from_signed(ids).unwrap()
    }

    fn rand_brute_force(a: &Labeling, b: &Labeling) -> f64 {
        let same = |l: &Labeling, i: usize, j: usize| match (l.assignments()[i], l.assignments()[j])
        {
            (Some(x), Some(y)) => x == y,
            _ => false,
        };
        let n = a.len();
        let mut agree = 0;
        let mut total = 0;
        for i in 0..n {
            for j in i + 1..n {
                total += 1;
                if same(a, i, j) == same(b, i, j) {
                    agree += 1;
                }
            }
        }
        agree as f64 / total as f64
    }

    #[test]
    fn labeling_requires_contiguous_ids() {
        assert!(Labeling::new(vec![Some(0), Some(2)]).is_err());
        let l = Labeling::new(vec![Some(1), None, Some(0)]).unwrap();
        assert_eq!(l.n_clusters(), 2);
        assert_eq!(l.n_noise(), 1);
        assert_eq!(l.to_signed(), vec![1, -1, 0]);
    }

    #[test]
    fn histogram_examples() {
        let h = equi_width_histogram(&[0.0, 1.0], 2).unwrap();
        assert_eq!(h.labeling.to_signed(), vec![0, 1]);
        let h = equi_width_histogram(&[0.0, 0.49, 0.5, 1.0], 2).unwrap();
        assert_eq!(h.labeling.to_signed(), vec![0, 0, 1, 1]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn histogram_errors() {
        assert!(equi_width_histogram(&[], 4).is_err());
        assert!(equi_width_histogram(&[2.0, 2.0], 4).is_err());
        let h = equi_width_histogram(&[2.0, 2.0], 1).unwrap();
        assert_eq!(h.labeling.to_signed(), vec![0, 0]);
    }

    #[test]
    fn histogram_skips_empty_bins_in_labels() {
        let h = equi_width_histogram(&[0.0, 0.1, 0.95, 1.0], 4).unwrap();
        assert_eq!(h.labeling.to_signed(), vec![0, 0, 1, 1]);
        assert_eq!(
            histogram_counts(&[0.0, 0.1, 0.95, 1.0], &h),
            vec![2, 0, 0, 2]
        );
    }

    #[test]
    fn dbscan_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..20 {
            let j = (i as f64) * 1e-3;
            pts.push(vec![j, -j]);
        }
        for i in 0..20 {
            let j = (i as f64) * 1e-3;
            pts.push(vec![100.0 + j, j]);
        }
        let l = dbscan(&pts, DbscanParams::default(), &Euclidean);
        assert_eq!(l.n_clusters(), 2);
        assert_eq!(l.n_noise(), 0);
        assert!(l.assignments()[..20].iter().all(|&a| a == Some(0)));
        assert!(l.assignments()[20..].iter().all(|&a| a == Some(1)));
    }

    #[test]
    fn dbscan_all_noise_cases() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 10.0]).collect();
        let l = dbscan(
            &pts,
            DbscanParams {
                eps: 1.0,
                min_samples: 2,
            },
            &Euclidean,
        );
        assert_eq!(l.n_noise(), 5);
        let pts: Vec<Vec<f64>> = vec![vec![0.0]; 9];
        let l = dbscan(&pts, DbscanParams::default(), &Euclidean);
        assert_eq!(l.n_noise(), 9);
    }

    #[test]
    fn dbscan_border_joins_first_cluster() {
        // 0.9 is a border point within reach of both cores 0.0 and 1.8
        let params = DbscanParams {
            eps: 1.0,
            min_samples: 4,
        };
        let pts: Vec<Vec<f64>> = [0.0, -0.3, -0.5, -0.6, 0.9, 1.8, 2.1, 2.3, 2.4]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let l = dbscan(&pts, params, &Euclidean);
        assert_eq!(l.to_signed(), vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
        let pts: Vec<Vec<f64>> = [1.8, 2.1, 2.3, 2.4, 0.9, 0.0, -0.3, -0.5, -0.6]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let l = dbscan(&pts, params, &Euclidean);
        assert_eq!(l.to_signed(), vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn dbscan_custom_metric() {
        let m = FnMetric(|a: &[f64], b: &[f64]| (a[0] - b[0]).abs());
        let pts = vec![vec![0.0, 50.0], vec![0.1, -50.0], vec![5.0, 0.0]];
        let l = dbscan(
            &pts,
            DbscanParams {
                eps: 0.5,
                min_samples: 2,
            },
            &m,
        );
        assert_eq!(l.to_signed(), vec![0, 0, -1]);
    }

    #[test]
    fn spread_examples() {
        let l = lab(&[0, 0, 0]);
        let s = cluster_oip_spread(&l, &[2.0, 5.0, 3.0]).unwrap();
        assert_eq!(s.mean_range, 3.0);
        let l = lab(&[0, 1, 2, -1]);
        let s = cluster_oip_spread(&l, &[2.0, 5.0, 3.0, 100.0]).unwrap();
        assert_eq!(s.mean_range, 0.0);
        assert!(cluster_oip_spread(&lab(&[-1, -1]), &[1.0, 2.0]).is_err());
        assert!(cluster_oip_spread(&lab(&[0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spread_is_size_weighted() {
        let l = lab(&[0, 0, 0, 1, 1]);
        let s = cluster_oip_spread(&l, &[0.0, 1.0, 3.0, 0.0, 1.0]).unwrap();
        assert!((s.mean_range - (3.0 * 3.0 + 2.0 * 1.0) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn rand_examples() {
        let a = lab(&[0, 0, 1, 1]);
        assert_eq!(compare_labelings(&a, &a).unwrap(), 1.0);
        let one = lab(&[0, 0, 0, 0]);
        let singletons = lab(&[0, 1, 2, 3]);
        assert_eq!(compare_labelings(&one, &singletons).unwrap(), 0.0);
        let b = lab(&[0, 1, 1, 1]);
        assert_eq!(rand_brute_force(&a, &b), 0.5);
        assert_eq!(compare_labelings(&a, &b).unwrap(), 0.5);
        // noise points behave like singletons
        let noise = lab(&[-1, -1, -1, -1]);
        assert_eq!(compare_labelings(&noise, &singletons).unwrap(), 1.0);
        assert!(compare_labelings(&a, &lab(&[0])).is_err());
    }

    fn labels(n: usize) -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-1i64..4, n)
    }

    proptest! {
        #[test]
        fn rand_matches_brute_force((a, b) in (2usize..40).prop_flat_map(|n| (labels(n), labels(n)))) {
            let a = Labeling::from_keys(a.iter().map(|&c| (c >= 0).then_some(c)));
            let b = Labeling::from_keys(b.iter().map(|&c| (c >= 0).then_some(c)));
            let fast = compare_labelings(&a, &b).unwrap();
            prop_assert!((fast - rand_brute_force(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(fast, compare_labelings(&b, &a).unwrap());
        }

        #[test]
        fn rand_is_one_under_relabeling(a in labels(30), shift in 1i64..10) {
            let a1 = Labeling::from_keys(a.iter().map(|&c| (c >= 0).then_some(c)));
            let a2 = Labeling::from_keys(a.iter().map(|&c| (c >= 0).then_some(c * 7 + shift)));
            prop_assert_eq!(compare_labelings(&a1, &a2).unwrap(), 1.0);
        }

        #[test]
        fn histogram_partitions(values in prop::collection::vec(-1e3f64..1e3, 2..200), n_bins in 1usize..80) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let h = equi_width_histogram(&values, n_bins).unwrap();
            prop_assert_eq!(h.edges.len(), n_bins + 1);
            for w in h.edges.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
            let counts = histogram_counts(&values, &h);
            prop_assert_eq!(counts.iter().sum::<usize>(), values.len());
            // each value lies inside the edges of its raw bin
            for &v in &values {
                let b = h.edges[1..n_bins].partition_point(|&e| e <= v);
                prop_assert!(v >= h.edges[b] && v <= h.edges[b + 1]);
            }
            prop_assert_eq!(h.labeling.n_clusters(), counts.iter().filter(|&&c| c > 0).count());
        }

        #[test]
        fn dbscan_scale_covariance(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 5..60),
            scale in 0.1f64..10.0,
        ) {
            let params = DbscanParams { eps: 1.0, min_samples: 3 };
            let base = dbscan(&pts, params, &Euclidean);
            let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
            let eps = params.eps * scale;
            // skip instances with a pair sitting on the eps boundary after rounding
            let near_boundary = pts.iter().enumerate().any(|(i, p)| pts[i + 1..].iter().any(|q| {
                (Euclidean.distance(p, q) - 1.0).abs() < 1e-9
            }));
            prop_assume!(!near_boundary);
            let other = dbscan(&scaled, DbscanParams { eps, ..params }, &Euclidean);
            prop_assert_eq!(base, other);
        }
    }
}
