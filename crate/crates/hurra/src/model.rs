//! Core data model: KPI matrices, expert labels and feature rankings.
//!
//! A dataset is an `F x T` matrix of real-or-missing KPI samples; ground
//! truth is a binary matrix of the same shape carrying per-cell expert
//! flags. Everything here is immutable after construction and safe to
//! share across threads.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Multivariate KPI time series: `F` named features sampled at `T`
/// timeslots (integer minutes since epoch). Cells are `None` when the
/// sample is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    timestamps: Vec<i64>,
    /// Row-major by feature: `values[j * T + t]`.
    values: Vec<Option<f64>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        timestamps: Vec<i64>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        let f = feature_names.len();
        let t = timestamps.len();
        if f == 0 {
            return Err(Error::EmptyData("dataset has no features".into()));
        }
        if t == 0 {
            return Err(Error::EmptyData("dataset has no timeslots".into()));
        }
        if values.len() != f * t {
            return Err(Error::InputFormat(format!(
                "value matrix has {} cells, expected {}x{}",
                values.len(),
                f,
                t
            )));
        }
        let mut seen = BTreeSet::new();
        for n in &feature_names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InputFormat(format!("duplicate feature name `{n}`")));
            }
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InputFormat(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::InputFormat(format!("non-finite sample {v}")));
        }
        Ok(Self {
            name: name.into(),
            feature_names,
            timestamps,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of features `F`.
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Number of timeslots `T`.
    pub fn num_timeslots(&self) -> usize {
        self.timestamps.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    /// One feature's full series.
    pub fn feature_row(&self, j: usize) -> &[Option<f64>] {
        let t = self.num_timeslots();
        &self.values[j * t..(j + 1) * t]
    }

    pub fn cell(&self, j: usize, t: usize) -> Option<f64> {
        self.values[j * self.num_timeslots() + t]
    }

    pub fn raw_values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Timeslot-major dense copy (`T` rows of `F` values), for detectors
    /// that consume one timeslot vector at a time. Fails if any cell is
    /// still missing, i.e. the dataset has not been preprocessed.
    pub fn timeslot_rows(&self) -> Result<Vec<Vec<f64>>> {
        let (f, t) = (self.num_features(), self.num_timeslots());
        let mut rows = vec![vec![0.0; f]; t];
        for j in 0..f {
            for (ti, cell) in self.feature_row(j).iter().enumerate() {
                match cell {
                    Some(v) => rows[ti][j] = *v,
                    None => {
                        return Err(Error::Degenerate(format!(
                            "feature `{}` has a missing sample at timeslot {ti}; run preprocessing first",
                            self.feature_names[j]
                        )))
                    }
                }
            }
        }
        Ok(rows)
    }
}

/// Expert labels: binary matrix aligned with the dataset it annotates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    feature_names: Vec<String>,
    num_timeslots: usize,
    /// Row-major by feature, `labels[j * T + t]`.
    labels: Vec<bool>,
}

impl GroundTruth {
    pub fn new(feature_names: Vec<String>, num_timeslots: usize, labels: Vec<bool>) -> Result<Self> {
        if feature_names.is_empty() || num_timeslots == 0 {
            return Err(Error::EmptyData("ground truth has no cells".into()));
        }
        if labels.len() != feature_names.len() * num_timeslots {
            return Err(Error::InputFormat(format!(
                "label matrix has {} cells, expected {}x{}",
                labels.len(),
                feature_names.len(),
                num_timeslots
            )));
        }
        let mut seen = BTreeSet::new();
        for n in &feature_names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InputFormat(format!("duplicate feature name `{n}`")));
            }
        }
        Ok(Self {
            feature_names,
            num_timeslots,
            labels,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_timeslots(&self) -> usize {
        self.num_timeslots
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn cell(&self, j: usize, t: usize) -> bool {
        self.labels[j * self.num_timeslots + t]
    }

    pub fn feature_row(&self, j: usize) -> &[bool] {
        &self.labels[j * self.num_timeslots..(j + 1) * self.num_timeslots]
    }
}

/// Per-timeslot binary labels: `a[t] = 1` marks an anomalous timeslot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeslotLabels(Vec<bool>);

impl TimeslotLabels {
    pub fn new(labels: Vec<bool>) -> Self {
        Self(labels)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of anomalous timeslots.
    pub fn num_anomalous(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Labels as 0/1 scores, for oracle-as-detector use.
    pub fn to_scores(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Per-timeslot anomaly scores emitted by a detector. Larger means more
/// anomalous. `binary` is present when the detector natively emits flags
/// (DBSCAN, oracle) or after an explicit binarization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    pub binary: Option<Vec<bool>>,
    pub detector_id: String,
    pub seed: u64,
}

impl ScoreSeries {
    pub fn new(scores: Vec<f64>, detector_id: impl Into<String>, seed: u64) -> Result<Self> {
        if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite score {v}")));
        }
        Ok(Self {
            scores,
            binary: None,
            detector_id: detector_id.into(),
            seed,
        })
    }

    pub fn with_binary(mut self, binary: Vec<bool>) -> Result<Self> {
        if binary.len() != self.scores.len() {
            return Err(Error::InputFormat(
                "binary vector length differs from scores".into(),
            ));
        }
        self.binary = Some(binary);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Ordered `(feature, score)` list, descending by score; ties broken by
/// feature name ascending so rankings are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    entries: Vec<(String, f64)>,
}

impl FeatureRanking {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of a feature, if present.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|(name, _)| name == feature)
            .map(|i| i + 1)
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(name, _)| name.as_str())
    }
}

/// Anomalous timeslots: `a_t = 1` iff at least one feature is flagged at `t`.
pub fn derive_timeslot_labels(gt: &GroundTruth) -> TimeslotLabels {
    let t = gt.num_timeslots();
    let labels = (0..t)
        .map(|ti| (0..gt.num_features()).any(|j| gt.cell(j, ti)))
        .collect();
    TimeslotLabels::new(labels)
}

/// Anomalous features: those with at least one flagged timeslot.
pub fn derive_feature_labels(gt: &GroundTruth) -> BTreeSet<String> {
    gt.feature_names()
        .iter()
        .enumerate()
        .filter(|(j, _)| gt.feature_row(*j).iter().any(|&b| b))
        .map(|(_, name)| name.clone())
        .collect()
}

/// Order features by score, descending; ties by name ascending. Rejects
/// non-finite scores, naming the offending feature.
pub fn rank_features(scores: &BTreeMap<String, f64>) -> Result<FeatureRanking> {
    for (name, v) in scores {
        if !v.is_finite() {
            return Err(Error::Degenerate(format!(
                "feature `{name}` has non-finite score {v}"
            )));
        }
    }
    let mut entries: Vec<(String, f64)> =
        scores.iter().map(|(k, v)| (k.clone(), *v)).collect();
    // BTreeMap iteration is name-ascending, so a stable sort on the score
    // alone implements the tie-break.
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
    Ok(FeatureRanking { entries })
}
