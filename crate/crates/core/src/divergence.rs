//! From embedding batches to a univariate divergence series.
//!
//! Each batch of per-image feature vectors is averaged element-wise and
//! compared with a fixed baseline vector (the training-set average), giving
//! one scalar `x_t` per batch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::exec::{map_indices, ExecPolicy};

/// Additive smoothing applied to every coordinate before KL normalization.
pub const KL_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Kld,
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Kld => "kld",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kld" | "kl" => Ok(Metric::Kld),
            "cosine" | "cos" => Ok(Metric::Cosine),
            other => Err(DriftError::config(format!("unknown metric '{other}'"))),
        }
    }
}

/// Argument order of the KL divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// `KL(batch || baseline)`.
    #[default]
    BatchToBaseline,
    /// `KL(baseline || batch)`.
    BaselineToBatch,
}

/// What each batch is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// The fixed baseline profile.
    #[default]
    Baseline,
    /// The previous batch's average; the first batch uses the baseline.
    PreviousBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub metric: Metric,
    #[serde(default)]
    pub kl_direction: KlDirection,
    #[serde(default)]
    pub reference: Reference,
}

impl SeriesOptions {
    pub fn new(metric: Metric) -> Self {
        SeriesOptions {
            metric,
            kl_direction: KlDirection::default(),
            reference: Reference::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub batch_index: usize,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineProfile {
    pub mean_vector: Vec<f64>,
}

impl BaselineProfile {
    pub fn new(mean_vector: Vec<f64>) -> Result<Self> {
        if mean_vector.is_empty() {
            return Err(DriftError::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        check_finite(&mean_vector)?;
        Ok(BaselineProfile { mean_vector })
    }

    pub fn dim(&self) -> usize {
        self.mean_vector.len()
    }
}

/// Ordered observations `x_1..x_N` fed to the detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSeries {
    pub values: Vec<f64>,
    /// Unknown for series read from external files.
    pub metric: Option<Metric>,
}

impl DivergenceSeries {
    pub fn new(values: Vec<f64>, metric: Option<Metric>) -> Result<Self> {
        check_finite(&values)?;
        Ok(DivergenceSeries { values, metric })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(DriftError::NonFinite {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(DriftError::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(())
}

/// Element-wise mean of the batch's vectors.
pub fn batch_average(batch: &FeatureBatch) -> Result<Vec<f64>> {
    let first = batch.vectors.first().ok_or(DriftError::EmptyBatch {
        batch_index: batch.batch_index,
    })?;
    let dim = first.len();
    if dim == 0 {
        return Err(DriftError::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let mut sum = vec![0.0; dim];
    for v in &batch.vectors {
        check_dims(first, v)?;
        check_finite(v)?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = batch.vectors.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// `1 - cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(DriftError::ZeroVector);
    }
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

/// Maps a vector onto the probability simplex: negatives clamped to zero,
/// [`KL_EPSILON`] added to each coordinate, then divided by the sum.
pub fn to_simplex(u: &[f64]) -> Result<Vec<f64>> {
    let clamped: Vec<f64> = u.iter().map(|&x| x.max(0.0)).collect();
    if clamped.iter().sum::<f64>() == 0.0 {
        return Err(DriftError::NonNormalizable);
    }
    let total: f64 = clamped.iter().map(|x| x + KL_EPSILON).sum();
    Ok(clamped.into_iter().map(|x| (x + KL_EPSILON) / total).collect())
}

/// `KL(P || Q) = sum p_i ln(p_i / q_i)` with `P`, `Q` the simplex
/// normalizations of `u`, `v`.
pub fn kl_divergence(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let p = to_simplex(u)?;
    let q = to_simplex(v)?;
    let kl: f64 = p.iter().zip(&q).map(|(pi, qi)| pi * (pi / qi).ln()).sum();
    Ok(kl.max(0.0))
}

fn divergence(reference: &[f64], batch_avg: &[f64], opts: &SeriesOptions) -> Result<f64> {
    match opts.metric {
        Metric::Cosine => cosine_distance(reference, batch_avg),
        Metric::Kld => match opts.kl_direction {
            KlDirection::BatchToBaseline => kl_divergence(batch_avg, reference),
            KlDirection::BaselineToBatch => kl_divergence(reference, batch_avg),
        },
    }
}

/// `values[t] = metric(baseline, batch_average(batches[t]))`.
pub fn build_series(
    baseline: &BaselineProfile,
    batches: &[FeatureBatch],
    opts: &SeriesOptions,
) -> Result<DivergenceSeries> {
    build_series_with(baseline, batches, opts, ExecPolicy::default())
}

pub fn build_series_with(
    baseline: &BaselineProfile,
    batches: &[FeatureBatch],
    opts: &SeriesOptions,
    exec: ExecPolicy,
) -> Result<DivergenceSeries> {
    let averages = map_indices(exec, batches.len(), |i| batch_average(&batches[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for avg in &averages {
        check_dims(&baseline.mean_vector, avg)?;
    }
    let values = map_indices(exec, averages.len(), |i| {
        let reference = match opts.reference {
            Reference::Baseline => &baseline.mean_vector,
            Reference::PreviousBatch if i == 0 => &baseline.mean_vector,
            Reference::PreviousBatch => &averages[i - 1],
        };
        divergence(reference, &averages[i], opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceSeries {
        values,
        metric: Some(opts.metric),
    })
}
