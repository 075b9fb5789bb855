//! Detection and ranking metrics: precision/recall, Pr-Rec AUC, ROC AUC,
//! nDCG, reading effort, average ranks and the Nemenyi critical
//! difference.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureRanking;

/// Confusion matrix counts over `T` timeslots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_labels(predicted: &[bool], actual: &[bool]) -> Self {
        let mut c = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 0 };
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }
}

/// Precision = TP/(TP+FP), recall = TP/(TP+FN). Zero denominators are an
/// explicit error rather than a silent zero.
pub fn precision_recall(c: &ConfusionCounts) -> Result<(f64, f64)> {
    if c.tp + c.fp == 0 {
        return Err(Error::Degenerate(
            "precision undefined: no positive predictions".into(),
        ));
    }
    if c.tp + c.fn_ == 0 {
        return Err(Error::Degenerate(
            "recall undefined: no positive labels".into(),
        ));
    }
    let precision = c.tp as f64 / (c.tp + c.fp) as f64;
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    Ok((precision, recall))
}

fn check_binary_mix(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&b| b).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "need at least one positive and one negative label".into(),
        ));
    }
    Ok((pos, neg))
}

/// Indices sorted by score descending, grouped into blocks of tied
/// scores.
fn tie_blocks(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match blocks.last_mut() {
            Some(block) if scores[block[0]] == scores[i] => block.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    blocks
}

/// Area under the precision-recall curve, computed as step-integrated
/// average precision: thresholds sweep every distinct score, tied scores
/// are processed as one block, and AP = sum_i (R_i - R_{i-1}) * P_i with
/// R_0 = 0. A constant scorer therefore lands exactly at the positive
/// prevalence, the metric's floor.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InputFormat("scores/labels length mismatch".into()));
    }
    let (pos, _) = check_binary_mix(labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut auc = 0.0;
    for block in tie_blocks(scores) {
        for &i in &block {
            if labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(auc)
}

/// Area under the ROC curve (trapezoidal over the FPR/TPR sweep, tied
/// scores as one block). Kept for comparison purposes; Pr-Rec AUC is the
/// headline detection metric.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InputFormat("scores/labels length mismatch".into()));
    }
    let (pos, neg) = check_binary_mix(labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_tpr = 0.0;
    let mut prev_fpr = 0.0;
    let mut auc = 0.0;
    for block in tie_blocks(scores) {
        for &i in &block {
            if labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(auc)
}

/// Normalized discounted cumulative gain of a feature ranking against
/// the expert-flagged feature set. The ideal DCG places all `t` flagged
/// features in the first `t` positions.
pub fn ndcg(ranking: &FeatureRanking, gt_features: &BTreeSet<String>) -> Result<f64> {
    check_gt_features(ranking, gt_features)?;
    let dcg: f64 = ranking
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, (name, _))| gt_features.contains(name))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let idcg: f64 = (1..=gt_features.len())
        .map(|i| 1.0 / ((i + 1) as f64).log2())
        .sum();
    Ok(dcg / idcg)
}

/// Reading effort `(m, t, e)`: `m` is the rank of the last expert-flagged
/// feature, `t` the number of flagged features and `e = m - t` the
/// interleaved false positives an operator reads on the way.
pub fn reading_effort(
    ranking: &FeatureRanking,
    gt_features: &BTreeSet<String>,
) -> Result<(usize, usize, usize)> {
    check_gt_features(ranking, gt_features)?;
    let m = ranking
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, (name, _))| gt_features.contains(name))
        .map(|(i, _)| i + 1)
        .max()
        .expect("gt_features checked non-empty");
    let t = gt_features.len();
    Ok((m, t, m - t))
}

fn check_gt_features(ranking: &FeatureRanking, gt_features: &BTreeSet<String>) -> Result<()> {
    if gt_features.is_empty() {
        return Err(Error::Degenerate("no expert-flagged features".into()));
    }
    let ranked: BTreeSet<&str> = ranking.feature_names().collect();
    for f in gt_features {
        if !ranked.contains(f.as_str()) {
            return Err(Error::Degenerate(format!(
                "flagged feature `{f}` is absent from the ranking"
            )));
        }
    }
    Ok(())
}

/// Mean rank per algorithm over a complete `algorithms x datasets`
/// metric matrix. Within each dataset the best (largest) metric gets
/// rank 1; ties receive the average of the ranks they span.
pub fn average_ranks(metric_matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = metric_matrix.len();
    if k == 0 {
        return Err(Error::EmptyData("no algorithms to rank".into()));
    }
    let n = metric_matrix[0].len();
    if n == 0 || metric_matrix.iter().any(|row| row.len() != n) {
        return Err(Error::InputFormat(
            "metric matrix must be complete and non-empty".into(),
        ));
    }
    let mut sums = vec![0.0; k];
    for d in 0..n {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            metric_matrix[b][d]
                .partial_cmp(&metric_matrix[a][d])
                .expect("finite metrics")
        });
        let mut i = 0;
        while i < k {
            let mut j = i;
            while j + 1 < k && metric_matrix[order[j + 1]][d] == metric_matrix[order[i]][d] {
                j += 1;
            }
            // tied block spans ranks i+1 ..= j+1
            let avg = (i + 1 + j + 1) as f64 / 2.0;
            for &alg in &order[i..=j] {
                sums[alg] += avg;
            }
            i = j + 1;
        }
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Critical values for the two-tailed Nemenyi test (Studentized range
/// statistic divided by sqrt(2)), k = 2..=20.
const Q_ALPHA_005: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_ALPHA_010: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

/// Nemenyi critical difference: two algorithms differ significantly when
/// their average ranks differ by at least `CD = q_alpha *
/// sqrt(k(k+1)/(6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if !(2..=20).contains(&k) {
        return Err(Error::Degenerate(format!(
            "critical values embedded for 2..=20 algorithms, got {k}"
        )));
    }
    if n == 0 {
        return Err(Error::Degenerate("need at least one dataset".into()));
    }
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_ALPHA_005
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_ALPHA_010
    } else {
        return Err(Error::Degenerate(format!(
            "alpha must be 0.05 or 0.10, got {alpha}"
        )));
    };
    let q = table[k - 2];
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

/// Pairs of algorithm indices whose mean-rank distance is below the
/// critical difference, i.e. not significantly different. Feed to a CD
/// diagram plotter.
pub fn nemenyi_links(mean_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for i in 0..mean_ranks.len() {
        for j in (i + 1)..mean_ranks.len() {
            if (mean_ranks[i] - mean_ranks[j]).abs() < cd {
                links.push((i, j));
            }
        }
    }
    links
}
