//! Two-sample statistics shared by the sliding-window and change point detectors.
//!
//! Rank statistics (Mann-Whitney, Cramér-von Mises, Kolmogorov-Smirnov) are
//! evaluated in exact integer arithmetic on pooled mid-ranks and only turned
//! into floating point at the end, so that the split scan in [`crate::cpm`]
//! and the standalone functions here agree bit for bit.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{DriftError, Result};

/// Pooled sizes up to this use the exact Mann-Whitney null distribution.
pub const EXACT_MW_MAX_POOLED: usize = 20;

/// Mean of the Kolmogorov distribution, `sqrt(pi/2) ln 2`.
pub const KOLMOGOROV_MEAN: f64 = 0.868_731_160_636_159_1;
/// Standard deviation of the Kolmogorov distribution, `sqrt(pi^2/12 - mean^2)`.
pub const KOLMOGOROV_SD: f64 = 0.260_332_871_462_412_9;

/// A non-empty sample of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DriftError::InsufficientSample {
                required: 1,
                actual: 0,
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DriftError::NonFinite { index, value });
        }
        Ok(Sample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = DriftError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Sample::new(values)
    }
}

impl TryFrom<&[f64]> for Sample {
    type Error = DriftError;

    fn try_from(values: &[f64]) -> Result<Self> {
        Sample::new(values.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleResult {
    /// Raw statistic: U for Mann-Whitney, Anderson's T for Cramér-von Mises,
    /// the sup ECDF distance for Kolmogorov-Smirnov, Student's t.
    pub statistic: f64,
    /// Null-standardized statistic. Signed (first sample minus second) for
    /// Mann-Whitney and Student, one-sided for CvM and KS.
    pub normalized: f64,
    pub p_value: Option<f64>,
}

/// The two-sample test used inside the change point model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "mw")]
    MannWhitney,
    #[serde(rename = "cvm")]
    CramerVonMises,
    #[serde(rename = "ks")]
    KolmogorovSmirnov,
    #[serde(rename = "student")]
    Student,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::MannWhitney,
        Statistic::CramerVonMises,
        Statistic::KolmogorovSmirnov,
        Statistic::Student,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Statistic::MannWhitney => "mw",
            Statistic::CramerVonMises => "cvm",
            Statistic::KolmogorovSmirnov => "ks",
            Statistic::Student => "student",
        }
    }

    /// Rank statistics have a null distribution that does not depend on the
    /// data distribution.
    pub fn is_rank_based(self) -> bool {
        !matches!(self, Statistic::Student)
    }

    /// Applies the test to two samples.
    pub fn apply(self, a: &Sample, b: &Sample) -> Result<TwoSampleResult> {
        match self {
            Statistic::MannWhitney => mann_whitney(a, b),
            Statistic::CramerVonMises => cramer_von_mises(a, b),
            Statistic::KolmogorovSmirnov => kolmogorov_smirnov(a, b),
            Statistic::Student => student_t(a, b),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Statistic {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mw" | "mann-whitney" | "mannwhitney" => Ok(Statistic::MannWhitney),
            "cvm" | "cramer-von-mises" => Ok(Statistic::CramerVonMises),
            "ks" | "kolmogorov-smirnov" => Ok(Statistic::KolmogorovSmirnov),
            "student" | "t" => Ok(Statistic::Student),
            other => Err(DriftError::config(format!("unknown statistic '{other}'"))),
        }
    }
}

/// How the Mann-Whitney p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MwPValue {
    /// Exact when the pooled size is at most [`EXACT_MW_MAX_POOLED`].
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Tie structure of a pooled sample: for each value, the half-open range
/// `[start, end)` of sorted positions occupied by its tie group.
#[derive(Debug, Default, Clone)]
pub(crate) struct PooledRanks {
    order: Vec<u32>,
    pub(crate) start: Vec<u32>,
    pub(crate) end: Vec<u32>,
    /// Sum over tie groups of `s^3 - s`.
    pub(crate) tie_sum: u64,
}

impl PooledRanks {
    pub(crate) fn compute(&mut self, values: &[f64]) {
        let n = values.len();
        self.order.clear();
        self.order.extend(0..n as u32);
        self.order
            .sort_unstable_by(|&i, &j| values[i as usize].total_cmp(&values[j as usize]));
        self.group_ties(values);
    }

    /// Same as [`compute`](Self::compute) with the sorting already done:
    /// `order` lists the indices of `values` in `total_cmp` order.
    pub(crate) fn compute_sorted(&mut self, values: &[f64], order: &[u32]) {
        debug_assert_eq!(values.len(), order.len());
        self.order.clear();
        self.order.extend_from_slice(order);
        self.group_ties(values);
    }

    fn group_ties(&mut self, values: &[f64]) {
        let n = values.len();
        self.start.clear();
        self.start.resize(n, 0);
        self.end.clear();
        self.end.resize(n, 0);
        self.tie_sum = 0;

        let mut lo = 0usize;
        while lo < n {
            let v = values[self.order[lo] as usize];
            let mut hi = lo + 1;
            // -0.0 and 0.0 sort adjacently under total_cmp and compare equal.
            while hi < n && values[self.order[hi] as usize] == v {
                hi += 1;
            }
            let size = (hi - lo) as u64;
            self.tie_sum += size * size * size - size;
            for &idx in &self.order[lo..hi] {
                self.start[idx as usize] = lo as u32;
                self.end[idx as usize] = hi as u32;
            }
            lo = hi;
        }
    }

    /// Twice the mid-rank of item `i` (1-based ranks).
    pub(crate) fn doubled_rank(&self, i: usize) -> u64 {
        (self.start[i] + 1 + self.end[i]) as u64
    }

    /// Sorted order of the pooled items.
    pub(crate) fn order(&self) -> &[u32] {
        &self.order
    }
}

fn require_two(a: &Sample, b: &Sample) -> Result<()> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(DriftError::InsufficientSample {
                required: 2,
                actual: s.len(),
            });
        }
    }
    Ok(())
}

fn pooled(a: &Sample, b: &Sample) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a.values());
    v.extend_from_slice(b.values());
    v
}

/// Null variance of U with the usual tie correction.
pub(crate) fn mw_variance(m: usize, n: usize, tie_sum: u64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let big_n = mf + nf;
    mf * nf / 12.0 * ((big_n + 1.0) - tie_sum as f64 / (big_n * (big_n - 1.0)))
}

/// Standardized U from its doubled value `2U`.
pub(crate) fn mw_normalize(u2: i64, m: usize, n: usize, tie_sum: u64) -> f64 {
    let var = mw_variance(m, n, tie_sum);
    if var <= 0.0 {
        return 0.0;
    }
    let centered = u2 as f64 / 2.0 - (m * n) as f64 / 2.0;
    centered / var.sqrt()
}

/// Mann-Whitney rank-sum test with mid-ranks for ties.
///
/// The statistic is `U` of the first sample (pairs with `a > b`, ties counting
/// one half). Exact null distribution for pooled sizes up to
/// [`EXACT_MW_MAX_POOLED`], continuity-corrected normal approximation above.
pub fn mann_whitney(a: &Sample, b: &Sample) -> Result<TwoSampleResult> {
    mann_whitney_with(a, b, MwPValue::Auto)
}

pub fn mann_whitney_with(a: &Sample, b: &Sample, method: MwPValue) -> Result<TwoSampleResult> {
    require_two(a, b)?;
    let (m, n) = (a.len(), b.len());
    let values = pooled(a, b);
    let mut ranks = PooledRanks::default();
    ranks.compute(&values);

    let rank_sum2: u64 = (0..m).map(|i| ranks.doubled_rank(i)).sum();
    let u2 = rank_sum2 as i64 - (m * (m + 1)) as i64;
    let normalized = mw_normalize(u2, m, n, ranks.tie_sum);

    let exact = match method {
        MwPValue::Auto => m + n <= EXACT_MW_MAX_POOLED,
        MwPValue::Exact => true,
        MwPValue::Normal => false,
    };
    let p = if exact {
        let doubled: Vec<u64> = (0..m + n).map(|i| ranks.doubled_rank(i)).collect();
        exact_rank_sum_p(&doubled, m, rank_sum2)
    } else {
        normal_mw_p(u2, m, n, ranks.tie_sum)
    };

    Ok(TwoSampleResult {
        statistic: u2 as f64 / 2.0,
        normalized,
        p_value: Some(p),
    })
}

fn normal_mw_p(u2: i64, m: usize, n: usize, tie_sum: u64) -> f64 {
    let var = mw_variance(m, n, tie_sum);
    if var <= 0.0 {
        return 1.0;
    }
    let dev = (u2 as f64 / 2.0 - (m * n) as f64 / 2.0).abs();
    let z = (dev - 0.5).max(0.0) / var.sqrt();
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided permutation p-value of a rank sum: the share of size-`m`
/// subsets of `doubled` whose sum is at least as far from its mean.
fn exact_rank_sum_p(doubled: &[u64], m: usize, observed: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let max_sum = total as usize;
    // counts[j][s]: subsets of size j with doubled-rank sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; m + 1];
    counts[0][0] = 1.0;
    for &d in doubled {
        let d = d as usize;
        for j in (1..=m).rev() {
            let (lower, upper) = counts.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (d..=max_sum).rev() {
                cur[s] += prev[s - d];
            }
        }
    }
    // mean of the doubled sum is m (N+1); compare |s - mean| in doubled units
    // scaled by N to stay integral.
    let big_n = doubled.len() as i64;
    let centre = |s: i64| (big_n * s - m as i64 * total as i64).abs();
    let obs = centre(observed as i64);
    let mut hit = 0.0;
    let mut all = 0.0;
    for (s, &c) in counts[m].iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        all += c;
        if centre(s as i64) >= obs {
            hit += c;
        }
    }
    (hit / all).min(1.0)
}

/// Exact null mean and standard deviation of Anderson's two-sample
/// Cramér-von Mises T for sample sizes `m`, `n` (continuous data).
pub fn cvm_null_moments(m: usize, n: usize) -> (f64, f64) {
    let (mf, nf) = (m as f64, n as f64);
    let big_n = mf + nf;
    let mean = 1.0 / 6.0 + 1.0 / (6.0 * big_n);
    let var = (big_n + 1.0) / (45.0 * big_n * big_n)
        * (4.0 * mf * nf * big_n - 3.0 * (mf * mf + nf * nf) - 2.0 * mf * nf)
        / (4.0 * mf * nf);
    (mean, var.sqrt())
}

/// T from `sum = sum over pooled points of (N A - m R)^2`, where `A` counts
/// first-sample values and `R` pooled values at or below the point.
pub(crate) fn cvm_from_sum(sum: u128, m: usize, n: usize) -> f64 {
    let big_n = (m + n) as f64;
    // Both conversions round correctly; the u64 one is much cheaper.
    let sum = match u64::try_from(sum) {
        Ok(s) => s as f64,
        Err(_) => sum as f64,
    };
    sum / ((m * n) as f64 * big_n * big_n)
}

pub(crate) fn cvm_normalize(t_stat: f64, m: usize, n: usize) -> f64 {
    let (mean, sd) = cvm_null_moments(m, n);
    (t_stat - mean) / sd
}

/// `D` from `max |N A - m R|` over pooled points.
pub(crate) fn ks_from_max(max_dev: u64, m: usize, n: usize) -> f64 {
    max_dev as f64 / (m * n) as f64
}

/// Scales `D` by `sqrt(mn/N)` and standardizes with the limiting
/// Kolmogorov moments.
pub(crate) fn ks_normalize(d: f64, m: usize, n: usize) -> f64 {
    let scale = ((m * n) as f64 / (m + n) as f64).sqrt();
    (scale * d - KOLMOGOROV_MEAN) / KOLMOGOROV_SD
}

/// Walks the pooled tie groups, calling `f(A, R, group_size)`.
fn for_each_group(ranks: &PooledRanks, m: usize, mut f: impl FnMut(u64, u64, u64)) {
    let order = ranks.order();
    let mut a_count = 0u64;
    let mut lo = 0usize;
    while lo < order.len() {
        let hi = ranks.end[order[lo] as usize] as usize;
        a_count += order[lo..hi].iter().filter(|&&i| (i as usize) < m).count() as u64;
        f(a_count, hi as u64, (hi - lo) as u64);
        lo = hi;
    }
}

/// Two-sample Cramér-von Mises statistic (Anderson's T), standardized with
/// its exact permutation null moments.
pub fn cramer_von_mises(a: &Sample, b: &Sample) -> Result<TwoSampleResult> {
    require_two(a, b)?;
    let (m, n) = (a.len(), b.len());
    let mut ranks = PooledRanks::default();
    ranks.compute(&pooled(a, b));
    let big_n = (m + n) as i128;
    let mut sum: u128 = 0;
    for_each_group(&ranks, m, |a_cnt, r, size| {
        let d = big_n * a_cnt as i128 - m as i128 * r as i128;
        sum += size as u128 * (d * d) as u128;
    });
    let t_stat = cvm_from_sum(sum, m, n);
    Ok(TwoSampleResult {
        statistic: t_stat,
        normalized: cvm_normalize(t_stat, m, n),
        p_value: None,
    })
}

/// Two-sample Kolmogorov-Smirnov distance between the ECDFs.
pub fn kolmogorov_smirnov(a: &Sample, b: &Sample) -> Result<TwoSampleResult> {
    require_two(a, b)?;
    let (m, n) = (a.len(), b.len());
    let mut ranks = PooledRanks::default();
    ranks.compute(&pooled(a, b));
    let big_n = (m + n) as i64;
    let mut max_dev = 0u64;
    for_each_group(&ranks, m, |a_cnt, r, _| {
        let d = (big_n * a_cnt as i64 - m as i64 * r as i64).unsigned_abs();
        max_dev = max_dev.max(d);
    });
    let d = ks_from_max(max_dev, m, n);
    Ok(TwoSampleResult {
        statistic: d,
        normalized: ks_normalize(d, m, n),
        p_value: None,
    })
}

/// Pooled-variance Student t test, two-sided.
///
/// Zero pooled variance is not an error: equal means give `t = 0, p = 1`,
/// different means give `t = ±inf, p = 0`.
pub fn student_t(a: &Sample, b: &Sample) -> Result<TwoSampleResult> {
    require_two(a, b)?;
    let (m, n) = (a.len() as f64, b.len() as f64);
    let mean_a = a.values().iter().sum::<f64>() / m;
    let mean_b = b.values().iter().sum::<f64>() / n;
    let ss_a: f64 = a.values().iter().map(|x| (x - mean_a).powi(2)).sum();
    let ss_b: f64 = b.values().iter().map(|x| (x - mean_b).powi(2)).sum();
    let df = m + n - 2.0;
    let pooled_var = (ss_a + ss_b) / df;
    let diff = mean_a - mean_b;

    let (t, p) = if pooled_var <= 0.0 {
        match diff.partial_cmp(&0.0) {
            Some(Ordering::Equal) | None => (0.0, 1.0),
            Some(Ordering::Greater) => (f64::INFINITY, 0.0),
            Some(Ordering::Less) => (f64::NEG_INFINITY, 0.0),
        }
    } else {
        let t = diff / (pooled_var * (1.0 / m + 1.0 / n)).sqrt();
        (t, student_two_sided_p(t, df))
    };
    Ok(TwoSampleResult {
        statistic: t,
        normalized: t,
        p_value: Some(p),
    })
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn student_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { 1.0 } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}
