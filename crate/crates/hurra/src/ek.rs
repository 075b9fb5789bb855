//! Expert knowledge: per-KPI frequency counters distilled from solved
//! cases, used to re-weight feature scores, plus the leave-one-out
//! protocol that evaluates the mechanism without self-contamination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_feature_labels, rank_features, FeatureRanking, GroundTruth};

/// Counters for one KPI name: cases observed, cases flagged anomalous,
/// cases ignored by the expert despite a high score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EkCounters {
    pub n: u64,
    pub n_plus: u64,
    pub n_minus: u64,
}

/// Knowledge base keyed by KPI name. Feature identity across datasets is
/// exact name match; a name never observed contributes zero rates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EkBase {
    pub features: BTreeMap<String, EkCounters>,
}

impl EkBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Anomaly rate K+ = n+/n, zero for unseen names.
    pub fn k_plus(&self, feature: &str) -> f64 {
        match self.features.get(feature) {
            Some(c) if c.n > 0 => c.n_plus as f64 / c.n as f64,
            _ => 0.0,
        }
    }

    /// Ignore rate K- = n-/n, zero for unseen names.
    pub fn k_minus(&self, feature: &str) -> f64 {
        match self.features.get(feature) {
            Some(c) if c.n > 0 => c.n_minus as f64 / c.n as f64,
            _ => 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Bias gains for the two rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkGains {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl EkGains {
    pub fn new(gamma_plus: f64, gamma_minus: f64) -> Result<Self> {
        if !gamma_plus.is_finite() || !gamma_minus.is_finite() || gamma_plus < 0.0 || gamma_minus < 0.0
        {
            return Err(Error::Degenerate(format!(
                "gains must be finite and non-negative, got ({gamma_plus}, {gamma_minus})"
            )));
        }
        Ok(Self { gamma_plus, gamma_minus })
    }
}

impl Default for EkGains {
    /// Positive bias 2, no negative bias: the operating point where the
    /// positive gain saturates while the negative rate transfers poorly
    /// across deployments.
    fn default() -> Self {
        Self { gamma_plus: 2.0, gamma_minus: 0.0 }
    }
}

/// Re-weight scores: `s_j * (1 + gamma_plus K+_j - gamma_minus K-_j)`,
/// clamped at zero if the multiplier ever goes negative. Names absent
/// from the base pass through unchanged.
pub fn ek_apply(
    scores: &BTreeMap<String, f64>,
    base: &EkBase,
    gains: EkGains,
) -> BTreeMap<String, f64> {
    scores
        .iter()
        .map(|(name, s)| {
            let mult =
                1.0 + gains.gamma_plus * base.k_plus(name) - gains.gamma_minus * base.k_minus(name);
            (name.clone(), s * mult.max(0.0))
        })
        .collect()
}

/// Fold one solved case into the base. Every feature present in `scores`
/// (the retained features of the case) has its `n` incremented; features
/// flagged anomalous in the ground truth gain `n+`; unflagged features
/// whose score exceeds the minimum score among the flagged set gain `n-`.
pub fn ek_update(base: &EkBase, scores: &BTreeMap<String, f64>, gt: &GroundTruth) -> EkBase {
    let anomalous = derive_feature_labels(gt);
    // the comparison set is restricted to flagged features that survived
    // preprocessing, i.e. that carry a score
    let min_flagged = anomalous
        .iter()
        .filter_map(|name| scores.get(name))
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let mut out = base.clone();
    for (name, &s) in scores {
        let c = out.features.entry(name.clone()).or_default();
        c.n += 1;
        if anomalous.contains(name) {
            c.n_plus += 1;
        } else if min_flagged.is_finite() && s > min_flagged {
            c.n_minus += 1;
        }
    }
    out
}

/// Merge bases by component-wise counter sums, which is exactly the
/// n-weighted average of the rates.
pub fn ek_merge(bases: &[EkBase]) -> Result<EkBase> {
    if bases.is_empty() {
        return Err(Error::EmptyData("no bases to merge".into()));
    }
    let mut out = EkBase::new();
    for base in bases {
        for (name, c) in &base.features {
            let merged = out.features.entry(name.clone()).or_default();
            merged.n += c.n;
            merged.n_plus += c.n_plus;
            merged.n_minus += c.n_minus;
        }
    }
    Ok(out)
}

/// One solved case: the raw feature scores it produced and its expert
/// labels.
#[derive(Debug, Clone)]
pub struct EkCase {
    pub scores: BTreeMap<String, f64>,
    pub gt: GroundTruth,
}

/// Leave-one-out re-ranking: each case is ranked with a base built
/// exclusively from the other cases, so its own labels never touch the
/// knowledge applied to it.
pub fn leave_one_out(cases: &[EkCase], gains: EkGains) -> Result<Vec<FeatureRanking>> {
    if cases.len() < 2 {
        return Err(Error::Degenerate(format!(
            "leave-one-out needs at least 2 cases, got {}",
            cases.len()
        )));
    }
    let mut out = Vec::with_capacity(cases.len());
    for (held_out, case) in cases.iter().enumerate() {
        let mut base = EkBase::new();
        for (i, other) in cases.iter().enumerate() {
            if i != held_out {
                base = ek_update(&base, &other.scores, &other.gt);
            }
        }
        let adjusted = ek_apply(&case.scores, &base, gains);
        out.push(rank_features(&adjusted)?);
    }
    Ok(out)
}
