//! Regression trees grown by exact greedy variance-reduction splits.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// Node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        let n = nodes.len() as u32;
        let valid = nodes.iter().enumerate().all(|(i, node)| match *node {
            Node::Split { left, right, .. } => {
                left > i as u32 && right > i as u32 && left < n && right < n
            }
            Node::Leaf { .. } => true,
        });
        valid.then_some(RegressionTree { nodes })
    }

    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left
                    } else {
                        right
                    } as usize;
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Training features ranked per column: `bins[f][row]` indexes the sorted
/// distinct values `uniq[f]`.
pub(crate) struct RankedFeatures {
    uniq: Vec<Vec<f64>>,
    bins: Vec<Vec<u32>>,
}

impl RankedFeatures {
    pub(crate) fn new(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let mut uniq = Vec::with_capacity(d);
        let mut bins = Vec::with_capacity(d);
        for f in 0..d {
            let mut col: Vec<f64> = x.iter().map(|r| r[f]).collect();
            col.sort_unstable_by(f64::total_cmp);
            col.dedup();
            let b = x
                .iter()
                .map(|r| {
                    col.binary_search_by(|v| v.total_cmp(&r[f]))
                        .expect("value present") as u32
                })
                .collect();
            uniq.push(col);
            bins.push(b);
        }
        RankedFeatures { uniq, bins }
    }

    fn n_features(&self) -> usize {
        self.uniq.len()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

struct Candidate {
    gain: f64,
    feature: usize,
    /// Rows with bin ≤ this go left.
    bin: u32,
    threshold: f64,
}

/// Scratch buffers reused across nodes.
struct Scratch {
    sum: Vec<f64>,
    count: Vec<u32>,
    pairs: Vec<(u32, f64)>,
    groups: Vec<(u32, f64, u32)>,
}

/// Grows a tree on `targets` and calls `leaf_value` with the rows of each
/// leaf to obtain its value. Returns the tree and the leaf value of every
/// training row.
pub(crate) fn grow<F>(
    features: &RankedFeatures,
    targets: &[f64],
    params: &GrowParams,
    mut leaf_value: F,
) -> (RegressionTree, Vec<f64>)
where
    F: FnMut(&[u32]) -> f64,
{
    let n = targets.len();
    let max_uniq = features.uniq.iter().map(Vec::len).max().unwrap_or(0);
    let mut scratch = Scratch {
        sum: vec![0.0; max_uniq],
        count: vec![0; max_uniq],
        pairs: Vec::new(),
        groups: Vec::new(),
    };
    let mut nodes = Vec::new();
    let mut row_values = vec![0.0; n];
    let rows: Vec<u32> = (0..n as u32).collect();

    // (node slot, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    nodes.push(Node::Leaf { value: 0.0 });
    while let Some((slot, rows, depth)) = stack.pop() {
        let split = if depth < params.max_depth && rows.len() >= params.min_samples_split.max(2) {
            best_split(features, targets, &rows, &mut scratch)
        } else {
            None
        };
        match split {
            Some(c) => {
                let bins = &features.bins[c.feature];
                let (left, right): (Vec<u32>, Vec<u32>) =
                    rows.iter().partition(|&&r| bins[r as usize] <= c.bin);
                let l = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot] = Node::Split {
                    feature: c.feature as u32,
                    threshold: c.threshold,
                    left: l as u32,
                    right: l as u32 + 1,
                };
                stack.push((l + 1, right, depth + 1));
                stack.push((l, left, depth + 1));
            }
            None => {
                let value = leaf_value(&rows);
                for &r in &rows {
                    row_values[r as usize] = value;
                }
                nodes[slot] = Node::Leaf { value };
            }
        }
    }
    (RegressionTree { nodes }, row_values)
}

fn best_split(
    features: &RankedFeatures,
    targets: &[f64],
    rows: &[u32],
    scratch: &mut Scratch,
) -> Option<Candidate> {
    let first = targets[rows[0] as usize];
    if rows.iter().all(|&r| targets[r as usize] == first) {
        return None;
    }
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| targets[r as usize]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Candidate> = None;

    for f in 0..features.n_features() {
        let uniq = &features.uniq[f];
        if uniq.len() < 2 {
            continue;
        }
        let bins = &features.bins[f];
        // per-bin sums accumulate in row order on both paths
        scratch.groups.clear();
        if uniq.len() <= 2 * n {
            let (sum, count) = (
                &mut scratch.sum[..uniq.len()],
                &mut scratch.count[..uniq.len()],
            );
            sum.fill(0.0);
            count.fill(0);
            for &r in rows {
                let b = bins[r as usize] as usize;
                sum[b] += targets[r as usize];
                count[b] += 1;
            }
            for b in 0..uniq.len() {
                if count[b] > 0 {
                    scratch.groups.push((b as u32, sum[b], count[b]));
                }
            }
        } else {
            scratch.pairs.clear();
            scratch.pairs.extend(
                rows.iter()
                    .map(|&r| (bins[r as usize], targets[r as usize])),
            );
            scratch.pairs.sort_by_key(|p| p.0);
            for &(b, t) in &scratch.pairs {
                match scratch.groups.last_mut() {
                    Some(g) if g.0 == b => {
                        g.1 += t;
                        g.2 += 1;
                    }
                    _ => scratch.groups.push((b, t, 1)),
                }
            }
        }
        if scratch.groups.len() < 2 {
            continue;
        }
        let mut left_sum = 0.0;
        let mut left_n = 0u32;
        for k in 0..scratch.groups.len() - 1 {
            let (b, s, c) = scratch.groups[k];
            left_sum += s;
            left_n += c;
            let right_n = n as u32 - left_n;
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64
                - parent;
            if best.as_ref().is_none_or(|c| gain > c.gain) {
                let lo = uniq[b as usize];
                let hi = uniq[scratch.groups[k + 1].0 as usize];
                let mut threshold = lo + (hi - lo) / 2.0;
                if !(threshold >= lo && threshold < hi) {
                    threshold = lo;
                }
                best = Some(Candidate {
                    gain,
                    feature: f,
                    bin: b,
                    threshold,
                });
            }
        }
    }
    best.filter(|c| c.gain > 0.0)
}
