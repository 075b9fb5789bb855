//! Half-space trees: streaming mass profiles over randomly shifted
//! workspaces, with reference/latest tumbling windows.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, ScoreSeries};

use super::resolve_count;

/// One complete binary tree of depth `h`. Internal nodes live in a flat
/// array (node `i` has children `2i+1`, `2i+2`); splits are midpoints of
/// the per-tree randomly shifted workspace.
struct Tree {
    split_dim: Vec<usize>,
    split_val: Vec<f64>,
    depth: usize,
}

impl Tree {
    fn build(dims: usize, depth: usize, rng: &mut ChaCha8Rng) -> Self {
        // workspace per dimension: random point s in (0,1), extended to
        // [s - 2w, s + 2w] with w = max(s, 1-s), covering the unit range
        let mut lo = vec![0.0; dims];
        let mut hi = vec![0.0; dims];
        for q in 0..dims {
            let s: f64 = rng.random_range(0.0..1.0);
            let w = s.max(1.0 - s);
            lo[q] = s - 2.0 * w;
            hi[q] = s + 2.0 * w;
        }
        let internal = (1 << depth) - 1;
        let mut split_dim = vec![0; internal];
        let mut split_val = vec![0.0; internal];
        // ranges narrow as we descend; walk breadth-first carrying them
        let mut ranges: Vec<(Vec<f64>, Vec<f64>)> = vec![(lo, hi)];
        for node in 0..internal {
            let (node_lo, node_hi) = ranges[node].clone();
            let dim = rng.random_range(0..dims);
            let mid = 0.5 * (node_lo[dim] + node_hi[dim]);
            split_dim[node] = dim;
            split_val[node] = mid;
            let mut left_hi = node_hi.clone();
            left_hi[dim] = mid;
            let mut right_lo = node_lo.clone();
            right_lo[dim] = mid;
            ranges.push((node_lo, left_hi));
            ranges.push((right_lo, node_hi));
        }
        Tree { split_dim, split_val, depth }
    }

    /// Leaf slot for a point, in 0..2^depth.
    fn leaf_of(&self, point: &[f64]) -> usize {
        let mut node = 0usize;
        for _ in 0..self.depth {
            let go_right = point[self.split_dim[node]] > self.split_val[node];
            node = 2 * node + 1 + usize::from(go_right);
        }
        node - ((1 << self.depth) - 1)
    }
}

struct Forest {
    trees: Vec<Tree>,
    /// Reference window leaf masses, per tree.
    reference: Vec<Vec<u32>>,
    /// Latest (accumulating) window leaf masses, per tree.
    latest: Vec<Vec<u32>>,
}

impl Forest {
    fn new(trees: Vec<Tree>, depth: usize) -> Self {
        let leaves = 1 << depth;
        let n = trees.len();
        Forest {
            trees,
            reference: vec![vec![0; leaves]; n],
            latest: vec![vec![0; leaves]; n],
        }
    }

    fn record_reference(&mut self, point: &[f64]) {
        for (tree, mass) in self.trees.iter().zip(self.reference.iter_mut()) {
            mass[tree.leaf_of(point)] += 1;
        }
    }

    fn record_latest(&mut self, point: &[f64]) {
        for (tree, mass) in self.trees.iter().zip(self.latest.iter_mut()) {
            mass[tree.leaf_of(point)] += 1;
        }
    }

    fn swap_windows(&mut self) {
        std::mem::swap(&mut self.reference, &mut self.latest);
        for mass in self.latest.iter_mut() {
            mass.iter_mut().for_each(|m| *m = 0);
        }
    }

    /// Anomaly score: negated sum over trees of the landing leaf's
    /// reference mass scaled by 2^depth, so sparse regions score high.
    fn score(&self, point: &[f64]) -> f64 {
        let scale = (1u64 << self.trees[0].depth) as f64;
        let mut total = 0.0;
        for (tree, mass) in self.trees.iter().zip(&self.reference) {
            total += mass[tree.leaf_of(point)] as f64 * scale;
        }
        -total
    }
}

/// Score every timeslot with streaming half-space trees. The first
/// `round(psi_frac * T)` timeslots build the reference mass profile and
/// are then scored retrospectively; afterwards each timeslot is scored
/// against the reference window while the latest window accumulates, the
/// two tumbling every window length.
pub fn hst_score(
    dhat: &Dataset,
    psi_frac: f64,
    trees: usize,
    h: usize,
    seed: u64,
) -> Result<ScoreSeries> {
    if trees == 0 || h == 0 {
        return Err(Error::Degenerate("need trees >= 1 and h >= 1".into()));
    }
    let rows = dhat.timeslot_rows()?;
    let t = rows.len();
    let f = dhat.num_features();
    let window = resolve_count(psi_frac, t, "psi_frac")?;
    if window < 2 {
        return Err(Error::Degenerate(format!("window of {window} timeslots is too small")));
    }
    if window > t {
        return Err(Error::Degenerate(format!(
            "window of {window} timeslots exceeds the series length {t}"
        )));
    }

    // workspace normalization fitted on the warmup window
    let mut lo = vec![f64::INFINITY; f];
    let mut hi = vec![f64::NEG_INFINITY; f];
    for row in &rows[..window] {
        for (q, v) in row.iter().enumerate() {
            lo[q] = lo[q].min(*v);
            hi[q] = hi[q].max(*v);
        }
    }
    let normalize = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(q, v)| {
                let span = hi[q] - lo[q];
                if span > 0.0 {
                    (v - lo[q]) / span
                } else {
                    0.5
                }
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let built: Vec<Tree> = (0..trees).map(|_| Tree::build(f, h, &mut rng)).collect();
    let mut forest = Forest::new(built, h);

    let normalized: Vec<Vec<f64>> = rows.iter().map(|r| normalize(r)).collect();
    for point in &normalized[..window] {
        forest.record_reference(point);
    }

    let mut scores = vec![0.0; t];
    // warmup slots, scored retrospectively with the warmed profile
    for (i, point) in normalized[..window].iter().enumerate() {
        scores[i] = forest.score(point);
    }
    let mut since_swap = 0usize;
    for (i, point) in normalized.iter().enumerate().skip(window) {
        scores[i] = forest.score(point);
        forest.record_latest(point);
        since_swap += 1;
        if since_swap == window {
            forest.swap_windows();
            since_swap = 0;
        }
    }
    ScoreSeries::new(scores, format!("hst(trees={trees},h={h})"), seed)
}
