//! Feature scoring: turn a preprocessed matrix and a binary timeslot
//! vector into one anomaly score per KPI.
//!
//! Two non-parametric policies (regime-mean difference and regime-rank
//! difference) plus four reference policies (random, alphabetical, and
//! normal/log-normal descriptive scoring).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, TimeslotLabels};

/// Scoring policy selector. A seed only exists for the random baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsPolicy {
    /// Absolute difference of per-regime means.
    Fsa,
    /// Absolute difference of per-regime ranks.
    Fsr,
    /// Seeded random permutation, the lower-bound baseline.
    Random { seed: u64 },
    /// Lexicographic order, the legacy-browser baseline.
    Alphabetical,
    /// Normal-CDF deviation of anomalous samples.
    Nd,
    /// Log-transformed variant of `Nd` for skewed data.
    NdLog,
}

impl FsPolicy {
    pub fn id(&self) -> &'static str {
        match self {
            FsPolicy::Fsa => "fsa",
            FsPolicy::Fsr => "fsr",
            FsPolicy::Random { .. } => "random",
            FsPolicy::Alphabetical => "alpha",
            FsPolicy::Nd => "nd",
            FsPolicy::NdLog => "ndlog",
        }
    }
}

/// Dispatch on the policy.
pub fn score_features(
    dhat: &Dataset,
    a: &TimeslotLabels,
    policy: FsPolicy,
) -> Result<BTreeMap<String, f64>> {
    match policy {
        FsPolicy::Fsa => fs_average(dhat, a),
        FsPolicy::Fsr => fs_rank(dhat, a),
        FsPolicy::Random { seed } => Ok(fs_random(dhat.feature_names(), seed)),
        FsPolicy::Alphabetical => Ok(fs_alphabetical(dhat.feature_names())),
        FsPolicy::Nd => fs_normal(dhat, a),
        FsPolicy::NdLog => fs_lognormal(dhat, a),
    }
}

fn check_regimes(dhat: &Dataset, a: &TimeslotLabels) -> Result<usize> {
    if a.len() != dhat.num_timeslots() {
        return Err(Error::InputFormat(
            "timeslot labels do not match the dataset length".into(),
        ));
    }
    let pos = a.num_anomalous();
    if pos == 0 || pos == a.len() {
        return Err(Error::Degenerate(format!(
            "{} of {} timeslots anomalous: both regimes must be non-empty",
            pos,
            a.len()
        )));
    }
    Ok(pos)
}

fn regime_means(dhat: &Dataset, a: &TimeslotLabels) -> Result<Vec<(String, f64, f64)>> {
    let pos = check_regimes(dhat, a)? as f64;
    let neg = (a.len() - a.num_anomalous()) as f64;
    let mut out = Vec::with_capacity(dhat.num_features());
    for (j, name) in dhat.feature_names().iter().enumerate() {
        let mut sum_anom = 0.0;
        let mut sum_norm = 0.0;
        for (cell, &flag) in dhat.feature_row(j).iter().zip(a.as_slice()) {
            let v = cell.ok_or_else(|| {
                Error::Degenerate(format!("feature `{name}` has missing samples"))
            })?;
            if flag {
                sum_anom += v;
            } else {
                sum_norm += v;
            }
        }
        out.push((name.clone(), sum_anom / pos, sum_norm / neg));
    }
    Ok(out)
}

/// Absolute difference between the anomalous-regime and normal-regime
/// mean of each standardized feature.
pub fn fs_average(dhat: &Dataset, a: &TimeslotLabels) -> Result<BTreeMap<String, f64>> {
    Ok(regime_means(dhat, a)?
        .into_iter()
        .map(|(name, anom, norm)| (name, (anom - norm).abs()))
        .collect())
}

/// Rank features within each regime by their regime mean (rank 1 =
/// largest mean, ties by name) and score each feature by the absolute
/// rank displacement between regimes.
pub fn fs_rank(dhat: &Dataset, a: &TimeslotLabels) -> Result<BTreeMap<String, f64>> {
    let means = regime_means(dhat, a)?;
    let rank_by = |key: fn(&(String, f64, f64)) -> f64| -> BTreeMap<&str, usize> {
        let mut order: Vec<&(String, f64, f64)> = means.iter().collect();
        order.sort_by(|x, y| {
            key(y)
                .partial_cmp(&key(x))
                .expect("finite means")
                .then_with(|| x.0.cmp(&y.0))
        });
        order
            .into_iter()
            .enumerate()
            .map(|(i, entry)| (entry.0.as_str(), i + 1))
            .collect()
    };
    let plus = rank_by(|e| e.1);
    let minus = rank_by(|e| e.2);
    Ok(means
        .iter()
        .map(|(name, _, _)| {
            let d = plus[name.as_str()] as f64 - minus[name.as_str()] as f64;
            (name.clone(), d.abs())
        })
        .collect())
}

/// Seeded random permutation of `{1..F}` as the scores.
pub fn fs_random(features: &[String], seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranks: Vec<usize> = (1..=features.len()).collect();
    ranks.shuffle(&mut rng);
    features
        .iter()
        .zip(ranks)
        .map(|(name, r)| (name.clone(), r as f64))
        .collect()
}

/// Score F for the lexicographically first name down to 1 for the last.
pub fn fs_alphabetical(features: &[String]) -> BTreeMap<String, f64> {
    let mut sorted: Vec<&String> = features.iter().collect();
    sorted.sort();
    let f = features.len();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, name)| (name.clone(), (f - i) as f64))
        .collect()
}

/// Standard normal distribution function.
fn phi(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Per-cell deviation scores for the descriptive policies: fit a Normal
/// on the normal-regime samples of each feature and score each anomalous
/// sample as `2|1/2 - Phi((x - mu)/sigma)|`, which is 0 at the fitted
/// mean and approaches 1 in the tails.
fn nd_cell_scores(dhat: &Dataset, a: &TimeslotLabels) -> Result<Vec<(String, Vec<f64>)>> {
    check_regimes(dhat, a)?;
    let normal_count = a.len() - a.num_anomalous();
    if normal_count < 2 {
        return Err(Error::Degenerate(
            "need at least 2 normal-regime samples to fit a distribution".into(),
        ));
    }
    let mut out = Vec::with_capacity(dhat.num_features());
    for (j, name) in dhat.feature_names().iter().enumerate() {
        let row = dhat.feature_row(j);
        let mut normal = Vec::with_capacity(normal_count);
        for (cell, &flag) in row.iter().zip(a.as_slice()) {
            if !flag {
                normal.push(cell.ok_or_else(|| {
                    Error::Degenerate(format!("feature `{name}` has missing samples"))
                })?);
            }
        }
        let mean = normal.iter().sum::<f64>() / normal.len() as f64;
        let var = normal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / normal.len() as f64;
        let std = var.sqrt();
        let mut scores = Vec::new();
        for (cell, &flag) in row.iter().zip(a.as_slice()) {
            if !flag {
                continue;
            }
            let x = cell.expect("checked above");
            let s = if std == 0.0 {
                // degenerate fit: exact match scores 0, anything else 1
                if x == mean {
                    0.0
                } else {
                    1.0
                }
            } else {
                2.0 * (0.5 - phi((x - mean) / std)).abs()
            };
            scores.push(s);
        }
        out.push((name.clone(), scores));
    }
    Ok(out)
}

/// Mean Normal-CDF deviation of the anomalous samples of each feature.
pub fn fs_normal(dhat: &Dataset, a: &TimeslotLabels) -> Result<BTreeMap<String, f64>> {
    Ok(nd_cell_scores(dhat, a)?
        .into_iter()
        .map(|(name, scores)| {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            (name, mean)
        })
        .collect())
}

/// Log-normal variant: `-log(1 - s_jt)` averaged over anomalous samples,
/// with the cell scores capped just below 1 so the transform stays
/// finite.
pub fn fs_lognormal(dhat: &Dataset, a: &TimeslotLabels) -> Result<BTreeMap<String, f64>> {
    const CAP: f64 = 1.0 - 1e-12;
    Ok(nd_cell_scores(dhat, a)?
        .into_iter()
        .map(|(name, scores)| {
            let sum: f64 = scores.iter().map(|s| -(1.0 - s.min(CAP)).ln()).sum();
            (name, sum / scores.len() as f64)
        })
        .collect())
}
