//! Random histogram forest: kurtosis-weighted random splits, scored by
//! the information content of the landing leaf. Batch detector.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, ScoreSeries};

/// Kurtosis (fourth standardized moment) of the node's values for one
/// feature; zero-variance features get zero so they are never selected.
fn kurtosis(rows: &[Vec<f64>], items: &[usize], feature: usize) -> f64 {
    let n = items.len() as f64;
    let mean = items.iter().map(|&i| rows[i][feature]).sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &i in items {
        let d = rows[i][feature] - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        0.0
    } else {
        m4 / (m2 * m2)
    }
}

/// Recursively split, storing per-leaf scores for the points it holds.
fn split(
    rows: &[Vec<f64>],
    items: Vec<usize>,
    depth: usize,
    max_height: usize,
    check_duplicates: bool,
    total: f64,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let leaf = |items: &[usize], out: &mut [f64]| {
        let size = if check_duplicates {
            let mut keys: Vec<Vec<u64>> = items
                .iter()
                .map(|&i| rows[i].iter().map(|v| v.to_bits()).collect())
                .collect();
            keys.sort_unstable();
            keys.dedup();
            keys.len()
        } else {
            items.len()
        };
        let score = (total / size as f64).ln();
        for &i in items {
            out[i] += score;
        }
    };

    if depth >= max_height || items.len() <= 1 {
        leaf(&items, out);
        return;
    }
    let f = rows[0].len();
    let weights: Vec<f64> = (0..f)
        .map(|feature| (1.0 + kurtosis(rows, &items, feature)).ln())
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 {
        leaf(&items, out);
        return;
    }
    // weighted feature choice
    let draw = rng.random_range(0.0..weight_sum);
    let mut acc = 0.0;
    let mut feature = f - 1;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            feature = j;
            break;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &i in &items {
        lo = lo.min(rows[i][feature]);
        hi = hi.max(rows[i][feature]);
    }
    if hi <= lo {
        leaf(&items, out);
        return;
    }
    // value lands in [lo, hi), so both sides keep at least one point
    let value = rng.random_range(lo..hi);
    let (left, right): (Vec<usize>, Vec<usize>) =
        items.into_iter().partition(|&i| rows[i][feature] <= value);
    split(rows, left, depth + 1, max_height, check_duplicates, total, rng, out);
    split(rows, right, depth + 1, max_height, check_duplicates, total, rng, out);
}

/// Score every timeslot with a random histogram forest: each tree picks
/// split features with probability proportional to `log(1 + kurtosis)`
/// and splits uniformly in the feature's range; a point landing in a
/// leaf of `|leaf|` points contributes `log(T / |leaf|)` per tree. With
/// `check_duplicates`, identical rows count once toward leaf sizes.
pub fn rhf_score(
    dhat: &Dataset,
    trees: usize,
    max_height: usize,
    check_duplicates: bool,
    seed: u64,
) -> Result<ScoreSeries> {
    if trees == 0 || max_height == 0 {
        return Err(Error::Degenerate("need trees >= 1 and max_height >= 1".into()));
    }
    let rows = dhat.timeslot_rows()?;
    let t = rows.len();
    if t < 2 {
        return Err(Error::Degenerate("cannot split a single-row dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = vec![0.0; t];
    for _ in 0..trees {
        split(
            &rows,
            (0..t).collect(),
            0,
            max_height,
            check_duplicates,
            t as f64,
            &mut rng,
            &mut scores,
        );
    }
    ScoreSeries::new(scores, format!("rhf(trees={trees})"), seed)
}
