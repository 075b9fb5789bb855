//! Data sanitization: grid alignment, degenerate-feature removal,
//! sample-and-hold imputation and per-KPI standard normalization.
//!
//! The composed [`preprocess`] pipeline turns raw telemetry into an
//! equally spaced, fully observed, zero-mean/unit-variance matrix ready
//! for detection and feature scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Bookkeeping for one preprocessing run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PreprocessReport {
    /// Features removed because every observed value was identical.
    pub dropped_constant: Vec<String>,
    /// Features removed for missing fraction > 0.5, with that fraction.
    pub dropped_missing: Vec<(String, f64)>,
    /// Cells filled by imputation.
    pub imputed_cells: usize,
    /// Per retained feature: (name, mean, population std) of the values
    /// the z-score was computed from.
    pub stats: Vec<(String, f64, f64)>,
}

/// Mean and population standard deviation (divide by n, no sample
/// correction).
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Snap timestamps onto a regular grid at the median inter-sample
/// interval (whole minutes, at least 1). Grid slots with no source
/// sample are missing-valued. When several source timestamps snap to the
/// same slot the earliest wins.
pub fn align_and_pad(raw: &Dataset) -> Result<Dataset> {
    let ts = raw.timestamps();
    if ts.len() < 2 {
        return Err(Error::Degenerate(
            "need at least 2 timestamps to infer the sampling interval".into(),
        ));
    }
    let mut deltas: Vec<i64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    deltas.sort_unstable();
    let mid = deltas.len() / 2;
    let median = if deltas.len() % 2 == 1 {
        deltas[mid] as f64
    } else {
        (deltas[mid - 1] + deltas[mid]) as f64 / 2.0
    };
    let interval = (median.round() as i64).max(1);

    let first = ts[0];
    let last = ts[ts.len() - 1];
    let slots = ((last - first) / interval) as usize + 1;
    let f = raw.num_features();

    let mut values: Vec<Option<f64>> = vec![None; f * slots];
    let mut occupied = vec![false; slots];
    for (src_t, &stamp) in ts.iter().enumerate() {
        let slot = (((stamp - first) as f64) / interval as f64).round() as usize;
        let slot = slot.min(slots - 1);
        if occupied[slot] {
            continue;
        }
        occupied[slot] = true;
        for j in 0..f {
            values[j * slots + slot] = raw.feature_row(j)[src_t];
        }
    }
    let timestamps = (0..slots).map(|i| first + i as i64 * interval).collect();
    Dataset::new(raw.name(), raw.feature_names().to_vec(), timestamps, values)
}

/// Remove constant features and features with more than half of their
/// samples missing (strictly greater than 0.5; exactly half is kept).
pub fn drop_degenerate_features(d: &Dataset) -> Result<(Dataset, PreprocessReport)> {
    let t = d.num_timeslots();
    let mut report = PreprocessReport::default();
    let mut kept = Vec::new();

    for (j, name) in d.feature_names().iter().enumerate() {
        let row = d.feature_row(j);
        let missing = row.iter().filter(|c| c.is_none()).count();
        let frac = missing as f64 / t as f64;
        if frac > 0.5 {
            report.dropped_missing.push((name.clone(), frac));
            continue;
        }
        let mut observed = row.iter().flatten();
        let constant = match observed.next() {
            Some(first) => observed.all(|v| v == first),
            None => true,
        };
        if constant {
            report.dropped_constant.push(name.clone());
            continue;
        }
        kept.push(j);
    }

    if kept.is_empty() {
        return Err(Error::EmptyData(
            "every feature was dropped as constant or too sparse".into(),
        ));
    }

    let names = kept.iter().map(|&j| d.feature_names()[j].clone()).collect();
    let mut values = Vec::with_capacity(kept.len() * t);
    for &j in &kept {
        values.extend_from_slice(d.feature_row(j));
    }
    let out = Dataset::new(d.name(), names, d.timestamps().to_vec(), values)?;
    Ok((out, report))
}

/// Sample-and-hold: each missing cell takes the most recent observed
/// value; leading gaps are back-filled with the first observation.
pub fn impute_sample_and_hold(d: &Dataset) -> Result<Dataset> {
    let t = d.num_timeslots();
    let mut values = Vec::with_capacity(d.num_features() * t);
    for (j, name) in d.feature_names().iter().enumerate() {
        let row = d.feature_row(j);
        let first = row.iter().flatten().next().copied().ok_or_else(|| {
            Error::Degenerate(format!(
                "feature `{name}` is entirely missing; it should have been dropped"
            ))
        })?;
        let mut held = first;
        for cell in row {
            if let Some(v) = cell {
                held = *v;
            }
            values.push(Some(held));
        }
    }
    Dataset::new(d.name(), d.feature_names().to_vec(), d.timestamps().to_vec(), values)
}

/// Z-score each feature: mean 0, population standard deviation 1.
pub fn standardize(d: &Dataset) -> Result<(Dataset, PreprocessReport)> {
    let t = d.num_timeslots();
    let mut report = PreprocessReport::default();
    let mut values = Vec::with_capacity(d.num_features() * t);
    for (j, name) in d.feature_names().iter().enumerate() {
        let row: Vec<f64> = d
            .feature_row(j)
            .iter()
            .map(|c| {
                c.ok_or_else(|| {
                    Error::Degenerate(format!("feature `{name}` still has missing samples"))
                })
            })
            .collect::<Result<_>>()?;
        let (mean, std) = moments(&row);
        if std == 0.0 {
            return Err(Error::Degenerate(format!(
                "feature `{name}` has zero variance; constant features must be dropped before standardization"
            )));
        }
        report.stats.push((name.clone(), mean, std));
        values.extend(row.iter().map(|v| Some((v - mean) / std)));
    }
    let out = Dataset::new(d.name(), d.feature_names().to_vec(), d.timestamps().to_vec(), values)?;
    Ok((out, report))
}

/// Full pipeline: align -> drop degenerate -> impute -> standardize.
/// The missing-fraction threshold is evaluated after alignment, so
/// padding-induced gaps count as missing.
pub fn preprocess(raw: &Dataset) -> Result<(Dataset, PreprocessReport)> {
    let aligned = if raw.num_timeslots() >= 2 {
        align_and_pad(raw)?
    } else {
        raw.clone()
    };
    let (kept, mut report) = drop_degenerate_features(&aligned)?;
    report.imputed_cells = kept.raw_values().iter().filter(|c| c.is_none()).count();
    let filled = impute_sample_and_hold(&kept)?;
    let (standardized, stats) = standardize(&filled)?;
    report.stats = stats.stats;
    Ok((standardized, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<Option<f64>>>, timestamps: Vec<i64>) -> Dataset {
        let names = (0..rows.len()).map(|j| format!("kpi{j}")).collect();
        let values = rows.into_iter().flatten().collect();
        Dataset::new("test", names, timestamps, values).unwrap()
    }

    #[test]
    fn align_identity_on_regular_grid() {
        let d = ds(vec![vec![Some(1.0), Some(2.0), Some(3.0)]], vec![0, 1, 2]);
        let out = align_and_pad(&d).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn align_pads_gap() {
        let d = ds(vec![vec![Some(1.0), Some(2.0), Some(3.0)]], vec![0, 1, 3]);
        let out = align_and_pad(&d).unwrap();
        assert_eq!(out.timestamps(), &[0, 1, 2, 3]);
        assert_eq!(out.feature_row(0), &[Some(1.0), Some(2.0), None, Some(3.0)]);
    }

    #[test]
    fn align_needs_two_timestamps() {
        let d = ds(vec![vec![Some(1.0)]], vec![0]);
        assert!(align_and_pad(&d).is_err());
    }

    #[test]
    fn drop_constant_and_sparse() {
        // 10 slots: kpi0 constant, kpi1 60% missing, kpi2 exactly 50% missing
        let mut rows = vec![vec![Some(7.0); 10]];
        let mut sparse = vec![None; 6];
        sparse.extend([Some(1.0), Some(2.0), Some(3.0), Some(4.0)]);
        rows.push(sparse);
        let mut half: Vec<Option<f64>> = vec![None; 5];
        half.extend([Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)]);
        rows.push(half);
        let d = ds(rows, (0..10).collect());
        let (out, report) = drop_degenerate_features(&d).unwrap();
        assert_eq!(report.dropped_constant, vec!["kpi0"]);
        assert_eq!(report.dropped_missing.len(), 1);
        assert_eq!(report.dropped_missing[0].0, "kpi1");
        assert_eq!(out.feature_names(), &["kpi2".to_string()]);
    }

    #[test]
    fn drop_everything_is_an_error() {
        let d = ds(vec![vec![Some(1.0), Some(1.0)]], vec![0, 1]);
        assert!(matches!(
            drop_degenerate_features(&d),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn impute_holds_and_backfills() {
        let d = ds(
            vec![vec![Some(1.0), None, None, Some(4.0)]],
            vec![0, 1, 2, 3],
        );
        let out = impute_sample_and_hold(&d).unwrap();
        assert_eq!(
            out.feature_row(0),
            &[Some(1.0), Some(1.0), Some(1.0), Some(4.0)]
        );

        let d = ds(vec![vec![None, Some(2.0), Some(3.0)]], vec![0, 1, 2]);
        let out = impute_sample_and_hold(&d).unwrap();
        assert_eq!(out.feature_row(0), &[Some(2.0), Some(2.0), Some(3.0)]);
    }

    #[test]
    fn standardize_small_example() {
        let d = ds(vec![vec![Some(1.0), Some(2.0), Some(3.0)]], vec![0, 1, 2]);
        let (out, report) = standardize(&d).unwrap();
        let got: Vec<f64> = out.feature_row(0).iter().map(|c| c.unwrap()).collect();
        let want = [-1.224744871391589, 0.0, 1.224744871391589];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
        assert!((report.stats[0].1 - 2.0).abs() < 1e-12);
        // idempotence on an already standardized series
        let (again, _) = standardize(&out).unwrap();
        for (a, b) in again.feature_row(0).iter().zip(out.feature_row(0)) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_rejects_constant() {
        let d = ds(vec![vec![Some(5.0), Some(5.0)]], vec![0, 1]);
        assert!(standardize(&d).is_err());
    }

    proptest! {
        // grid length arithmetic on gappy series
        #[test]
        fn align_grid_length(gaps in proptest::collection::vec(1i64..4, 2..30)) {
            let mut stamps = vec![0i64];
            for g in &gaps {
                stamps.push(stamps.last().unwrap() + g);
            }
            let t = stamps.len();
            let d = ds(vec![(0..t).map(|i| Some(i as f64)).collect()], stamps.clone());
            let out = align_and_pad(&d).unwrap();
            let mut deltas: Vec<i64> = stamps.windows(2).map(|w| w[1] - w[0]).collect();
            deltas.sort_unstable();
            let mid = deltas.len() / 2;
            let median = if deltas.len() % 2 == 1 {
                deltas[mid] as f64
            } else {
                (deltas[mid - 1] + deltas[mid]) as f64 / 2.0
            };
            let interval = (median.round() as i64).max(1);
            let expect = ((stamps[t - 1] - stamps[0]) / interval) as usize + 1;
            prop_assert_eq!(out.num_timeslots(), expect);
        }

        // forward-fill oracle over a random mask
        #[test]
        fn impute_matches_forward_fill(
            series in proptest::collection::vec(-100.0f64..100.0, 3..40),
            mask in proptest::collection::vec(proptest::bool::ANY, 3..40),
        ) {
            let n = series.len().min(mask.len());
            let mut cells: Vec<Option<f64>> = (0..n)
                .map(|i| if mask[i] { None } else { Some(series[i]) })
                .collect();
            if cells.iter().all(|c| c.is_none()) {
                cells[0] = Some(series[0]);
            }
            let d = ds(vec![cells.clone()], (0..n as i64).collect());
            let out = impute_sample_and_hold(&d).unwrap();

            // oracle: scan twice (forward fill, then backfill leading gap)
            let mut oracle = cells.clone();
            let mut held: Option<f64> = None;
            for c in oracle.iter_mut() {
                match c {
                    Some(v) => held = Some(*v),
                    None => *c = held,
                }
            }
            let first = cells.iter().flatten().next().copied().unwrap();
            for c in oracle.iter_mut() {
                if c.is_none() {
                    *c = Some(first);
                }
            }
            for (got, want) in out.feature_row(0).iter().zip(&oracle) {
                prop_assert_eq!(got, want);
            }
            // imputation never changes an observed value
            for (got, orig) in out.feature_row(0).iter().zip(&cells) {
                if let Some(v) = orig {
                    prop_assert_eq!(got.unwrap(), *v);
                }
            }
        }

        // post-hoc moment check on random series
        #[test]
        fn standardize_moments(series in proptest::collection::vec(-50.0f64..50.0, 4..60)) {
            prop_assume!(series.iter().any(|v| (v - series[0]).abs() > 1e-9));
            let n = series.len();
            let d = ds(vec![series.iter().map(|v| Some(*v)).collect()], (0..n as i64).collect());
            let (out, _) = standardize(&d).unwrap();
            let vals: Vec<f64> = out.feature_row(0).iter().map(|c| c.unwrap()).collect();
            let (mean, std) = super::moments(&vals);
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((std - 1.0).abs() < 1e-9);
            // strictly monotone affine map preserves ordering
            for i in 0..n {
                for k in (i + 1)..n {
                    prop_assert_eq!(
                        series[i] < series[k],
                        vals[i] < vals[k]
                    );
                }
            }
        }

        // composed pipeline leaves no missing cells and no constants
        #[test]
        fn pipeline_output_clean(seedish in 0u64..500) {
            let n = 24usize;
            let mut series = Vec::new();
            for j in 0..4u64 {
                let row: Vec<Option<f64>> = (0..n as u64)
                    .map(|i| {
                        let h = (seedish + 31 * j + 7 * i) % 11;
                        if h == 0 { None } else { Some(((h * i + j) % 17) as f64) }
                    })
                    .collect();
                series.push(row);
            }
            let d = ds(series, (0..n as i64).collect());
            if let Ok((out, _)) = preprocess(&d) {
                prop_assert!(out.raw_values().iter().all(|c| c.is_some()));
                for j in 0..out.num_features() {
                    let row = out.feature_row(j);
                    let first = row[0].unwrap();
                    prop_assert!(row.iter().any(|c| (c.unwrap() - first).abs() > 1e-12));
                }
            }
        }
    }
}
