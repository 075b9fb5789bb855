//! Seeded generator of labeled KPI corpora for desk-scale benchmarking.
//!
//! Each dataset carries one contiguous anomaly window; a configurable
//! subset of culprit features is perturbed inside it and the ground
//! truth marks exactly the perturbed cells. Corpus generation can plant
//! a recurring culprit name, which is the signal the knowledge-base
//! machinery feeds on.

use rand::Rng;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, GroundTruth};

/// Perturbation applied to culprit features inside the anomaly window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Impulses of +8 base-std on 30% of the window slots.
    Spike,
    /// Constant +5 base-std offset over the whole window.
    LevelShift,
    /// Extra noise at 4x the base std over the whole window.
    VarianceBurst,
}

/// Shape of the nominal signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    /// AR(1) with persistence 0.8 plus unit observation noise.
    Ar1,
    /// AR(1) plus a daily sinusoid.
    Seasonal,
    /// Alternate features between the two.
    Mixed,
}

/// Generator configuration. Pure function of the spec, seed included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub features: usize,
    pub timeslots: usize,
    pub n_culprits: usize,
    /// Target anomalous-timeslot fraction; the window length is
    /// `round(prevalence * T)`.
    pub prevalence: f64,
    pub anomaly_kind: AnomalyKind,
    pub base_kind: BaseKind,
    pub missing_frac: f64,
    pub seed: u64,
    /// Shared names so KPIs recur across corpus members; defaults to
    /// `kpi_000`-style names when absent.
    pub name_pool: Option<Vec<String>>,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.features == 0 || self.timeslots == 0 {
            return Err(Error::Degenerate("need at least one feature and timeslot".into()));
        }
        if self.n_culprits == 0 || self.n_culprits > self.features {
            return Err(Error::Degenerate(format!(
                "n_culprits must be in 1..=F, got {}",
                self.n_culprits
            )));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 0.5) {
            return Err(Error::Degenerate(format!(
                "prevalence must be in (0, 0.5), got {}",
                self.prevalence
            )));
        }
        if !(0.0..0.4).contains(&self.missing_frac) {
            return Err(Error::Degenerate(format!(
                "missing_frac must be in [0, 0.4), got {}",
                self.missing_frac
            )));
        }
        if (self.prevalence * self.timeslots as f64).round() < 1.0 {
            return Err(Error::Degenerate(
                "anomaly window would be shorter than one timeslot".into(),
            ));
        }
        if let Some(pool) = &self.name_pool {
            if pool.len() < self.features {
                return Err(Error::Degenerate(format!(
                    "name pool has {} entries, need {}",
                    pool.len(),
                    self.features
                )));
            }
        }
        Ok(())
    }

    fn feature_names(&self) -> Vec<String> {
        match &self.name_pool {
            Some(pool) => pool[..self.features].to_vec(),
            None => (0..self.features).map(|j| format!("kpi_{j:03}")).collect(),
        }
    }
}

/// Minutes in a day; the seasonal component completes one cycle per day
/// at the 1-minute timescale.
const DAY_MINUTES: f64 = 1440.0;

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Generate one labeled dataset. Culprit selection can be constrained by
/// [`generate_corpus`]; `forced_culprits` of `None` draws them from the
/// spec's own stream.
fn generate_with_culprits(
    spec: &SynthSpec,
    forced_culprits: Option<Vec<usize>>,
) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let (f, t) = (spec.features, spec.timeslots);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // nominal signals
    let mut values: Vec<f64> = Vec::with_capacity(f * t);
    for j in 0..f {
        let seasonal = match spec.base_kind {
            BaseKind::Ar1 => false,
            BaseKind::Seasonal => true,
            BaseKind::Mixed => j % 2 == 1,
        };
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut prev = 0.0;
        for ti in 0..t {
            let innovation: f64 = StandardNormal.sample(&mut rng);
            let ar = 0.8 * prev + innovation;
            prev = ar;
            let noise: f64 = StandardNormal.sample(&mut rng);
            let mut v = ar + noise;
            if seasonal {
                v += 2.0 * (std::f64::consts::TAU * ti as f64 / DAY_MINUTES + phase).sin();
            }
            values.push(v);
        }
    }

    // missing mask over the nominal data, drawn before anomaly injection
    let mut missing = vec![false; f * t];
    if spec.missing_frac > 0.0 {
        for cell in missing.iter_mut() {
            if rng.random_range(0.0..1.0) < spec.missing_frac {
                *cell = true;
            }
        }
    }

    // anomaly window and culprit set
    let window_len = (spec.prevalence * t as f64).round() as usize;
    let start = rng.random_range(0..=(t - window_len));
    let culprits: Vec<usize> = match forced_culprits {
        Some(c) => c,
        None => index::sample(&mut rng, f, spec.n_culprits).into_vec(),
    };

    let mut labels = vec![false; f * t];
    for &j in &culprits {
        let base_std = population_std(&values[j * t..(j + 1) * t]).max(1e-6);
        let slots: Vec<usize> = match spec.anomaly_kind {
            AnomalyKind::Spike => {
                let count = ((0.3 * window_len as f64).round() as usize).max(1);
                let mut picked = index::sample(&mut rng, window_len, count.min(window_len)).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|o| start + o).collect()
            }
            AnomalyKind::LevelShift | AnomalyKind::VarianceBurst => {
                (start..start + window_len).collect()
            }
        };
        for ti in slots {
            let idx = j * t + ti;
            match spec.anomaly_kind {
                AnomalyKind::Spike => values[idx] += 8.0 * base_std,
                AnomalyKind::LevelShift => values[idx] += 5.0 * base_std,
                AnomalyKind::VarianceBurst => {
                    let extra: f64 = StandardNormal.sample(&mut rng);
                    values[idx] += 4.0 * base_std * extra;
                }
            }
            // injected cells are always observed
            missing[idx] = false;
            labels[idx] = true;
        }
    }

    let cells: Vec<Option<f64>> = values
        .into_iter()
        .zip(&missing)
        .map(|(v, &gone)| if gone { None } else { Some(v) })
        .collect();
    let names = spec.feature_names();
    let timestamps: Vec<i64> = (0..t as i64).collect();
    let dataset = Dataset::new(&spec.name, names.clone(), timestamps, cells)?;
    let gt = GroundTruth::new(names, t, labels)?;
    Ok((dataset, gt))
}

/// Generate one labeled dataset from the spec.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, GroundTruth)> {
    generate_with_culprits(spec, None)
}

/// Generate `n` independent datasets sharing the spec's name pool.
/// With probability `p_recurring` the pool's first name (the chronic
/// culprit) is planted among a member's culprits; otherwise it is
/// excluded from the draw. Member seeds derive as `seed + index`.
pub fn generate_corpus(
    n: usize,
    spec: &SynthSpec,
    p_recurring: f64,
    seed: u64,
) -> Result<Vec<(Dataset, GroundTruth)>> {
    if n < 2 {
        return Err(Error::Degenerate(format!("corpus needs at least 2 datasets, got {n}")));
    }
    if spec.name_pool.is_none() {
        return Err(Error::Degenerate(
            "corpus generation needs a shared name pool so KPIs recur".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_recurring) {
        return Err(Error::Degenerate(format!(
            "p_recurring must be in [0, 1], got {p_recurring}"
        )));
    }
    spec.validate()?;

    // member plans are drawn sequentially so generation can run in any
    // order afterwards
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(seed);
    let f = spec.features;
    let mut plans = Vec::with_capacity(n);
    for i in 0..n {
        let include_chronic = spec.n_culprits >= f || corpus_rng.random_range(0.0..1.0) < p_recurring;
        let culprits: Vec<usize> = if include_chronic {
            let mut rest =
                index::sample(&mut corpus_rng, f - 1, spec.n_culprits.min(f) - 1).into_vec();
            for r in rest.iter_mut() {
                *r += 1; // indices 1..F, keeping slot 0 for the chronic name
            }
            let mut c = vec![0];
            c.extend(rest);
            c
        } else {
            let mut c = index::sample(&mut corpus_rng, f - 1, spec.n_culprits).into_vec();
            for r in c.iter_mut() {
                *r += 1;
            }
            c
        };
        let mut member = spec.clone();
        member.name = format!("{}-{i:03}", spec.name);
        member.seed = seed.wrapping_add(i as u64 + 1);
        plans.push((member, culprits));
    }

    plans
        .into_iter()
        .map(|(member, culprits)| generate_with_culprits(&member, Some(culprits)))
        .collect()
}
