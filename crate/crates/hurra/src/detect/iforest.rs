//! Isolation forest: random axis-aligned splits isolate anomalies in
//! short paths. Batch detector.

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, ScoreSeries};

use super::resolve_count;

/// Average path length of an unsuccessful binary-search-tree lookup over
/// `n` points, the normalizer for path lengths. Harmonic numbers are
/// summed exactly up to the subsample size.
fn c_factor(n: usize, harmonics: &[f64]) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    2.0 * harmonics[n - 1] - 2.0 * (n - 1) as f64 / n as f64
}

struct ForestContext<'a> {
    rows: &'a [Vec<f64>],
    features: Vec<usize>,
    height_limit: usize,
}

enum Node {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

fn build(ctx: &ForestContext, items: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> Node {
    if depth >= ctx.height_limit || items.len() <= 1 {
        return Node::Leaf { size: items.len() };
    }
    // candidate features with a non-degenerate range on this node
    let mut candidates = Vec::new();
    for &f in &ctx.features {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in &items {
            let v = ctx.rows[i][f];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            candidates.push((f, lo, hi));
        }
    }
    if candidates.is_empty() {
        return Node::Leaf { size: items.len() };
    }
    let (feature, lo, hi) = candidates[rng.random_range(0..candidates.len())];
    let value = rng.random_range(lo..hi);
    let (left_items, right_items): (Vec<usize>, Vec<usize>) =
        items.into_iter().partition(|&i| ctx.rows[i][feature] <= value);
    Node::Split {
        feature,
        value,
        left: Box::new(build(ctx, left_items, depth + 1, rng)),
        right: Box::new(build(ctx, right_items, depth + 1, rng)),
    }
}

fn path_length(node: &Node, row: &[f64], depth: usize, harmonics: &[f64]) -> f64 {
    match node {
        Node::Leaf { size } => depth as f64 + c_factor(*size, harmonics),
        Node::Split { feature, value, left, right } => {
            if row[*feature] <= *value {
                path_length(left, row, depth + 1, harmonics)
            } else {
                path_length(right, row, depth + 1, harmonics)
            }
        }
    }
}

/// Score every timeslot with an isolation forest: `trees` trees, each
/// grown on a subsample of `round(sample_frac * T)` timeslots over a
/// random subset of `round(feature_frac * F)` features. The score is
/// `2^(-E[h(x)] / c(psi))`, in (0, 1), larger for easier-to-isolate
/// points.
pub fn if_score(
    dhat: &Dataset,
    trees: usize,
    sample_frac: f64,
    feature_frac: f64,
    seed: u64,
) -> Result<ScoreSeries> {
    if trees == 0 {
        return Err(Error::Degenerate("need at least one tree".into()));
    }
    let rows = dhat.timeslot_rows()?;
    let t = rows.len();
    let f = dhat.num_features();
    let psi = resolve_count(sample_frac, t, "sample_frac")?;
    if psi < 2 {
        return Err(Error::Degenerate(format!(
            "subsample of {psi} timeslots is too small to split"
        )));
    }
    let n_features = resolve_count(feature_frac, f, "feature_frac")?.max(1);

    // harmonic numbers H(1)..H(psi), exact
    let mut harmonics = Vec::with_capacity(psi);
    let mut h = 0.0;
    for i in 1..=psi {
        h += 1.0 / i as f64;
        harmonics.push(h);
    }
    let height_limit = (psi as f64).log2().ceil() as usize;
    let normalizer = c_factor(psi, &harmonics);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path_sums = vec![0.0; t];
    for _ in 0..trees {
        let sample = index::sample(&mut rng, t, psi).into_vec();
        let features = index::sample(&mut rng, f, n_features).into_vec();
        let ctx = ForestContext { rows: &rows, features, height_limit };
        let root = build(&ctx, sample, 0, &mut rng);
        for (i, row) in rows.iter().enumerate() {
            path_sums[i] += path_length(&root, row, 0, &harmonics);
        }
    }

    let scores = path_sums
        .into_iter()
        .map(|sum| 2f64.powf(-(sum / trees as f64) / normalizer))
        .collect();
    ScoreSeries::new(scores, format!("if(trees={trees})"), seed)
}
