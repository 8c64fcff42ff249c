//! Monte Carlo critical values for the change point model.
//!
//! `replications` independent null streams are simulated in lock step. At
//! each `t`, `h_t` is the upper `alpha` quantile of `W_t` over the streams
//! that have not yet exceeded an earlier threshold; streams above `h_t` are
//! then retired. Conditioning on survival makes the false-alarm probability
//! at every step equal to `alpha` given no earlier alarm.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cpm::SplitScanner;
use crate::error::{DriftError, Result};
use crate::exec::{map_indices, map_mut_with, ExecPolicy};
use crate::two_sample::Statistic;

pub const TABLE_FORMAT_VERSION: u32 = 1;
/// Every integer `t` up to this is a knot.
pub const DENSE_UNTIL: usize = 200;
/// Growth factor between knots beyond [`DENSE_UNTIL`].
pub const KNOT_RATIO: f64 = 1.05;

/// Null distribution the calibration streams are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullDistribution {
    Uniform,
    Normal,
}

impl NullDistribution {
    /// Uniform for rank statistics, standard normal for Student.
    pub fn default_for(statistic: Statistic) -> Self {
        if statistic.is_rank_based() {
            NullDistribution::Uniform
        } else {
            NullDistribution::Normal
        }
    }

    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            NullDistribution::Uniform => rng.random::<f64>(),
            NullDistribution::Normal => rng.sample(StandardNormal),
        }
    }
}

/// Deterministic generator for replication `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Post-processing of the raw Monte Carlo quantiles.
///
/// Right after `t_min` the exact conditional critical values fall for a
/// while (retiring the most extreme streams leaves a calmer population), so
/// for large `alpha` the isotonic fit pulls the first few values well below
/// their raw estimates and those steps alarm more often than `alpha`. `None`
/// keeps the raw quantiles and the per-step conditional rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// Pool-adjacent-violators fit, non-decreasing in `t`.
    #[default]
    Isotonic,
    None,
}

impl std::str::FromStr for Smoothing {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotonic" => Ok(Smoothing::Isotonic),
            "none" => Ok(Smoothing::None),
            other => Err(DriftError::config(format!("unknown smoothing '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolation {
    pub rule: String,
    pub dense_until: usize,
    pub knot_ratio: f64,
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation {
            rule: "linear".to_string(),
            dense_until: DENSE_UNTIL,
            knot_ratio: KNOT_RATIO,
        }
    }
}

/// Calibrated critical values `h_t` with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub format_version: u32,
    pub statistic: Statistic,
    pub alpha: f64,
    pub min_segment: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub replications: usize,
    pub seed: u64,
    pub null_distribution: NullDistribution,
    pub interpolation: Interpolation,
    #[serde(default)]
    pub smoothing: Smoothing,
    pub knots: Vec<usize>,
    /// Critical values at the knots after `smoothing`.
    pub values: Vec<f64>,
    /// Monte Carlo quantiles before smoothing.
    pub raw_values: Vec<f64>,
    /// Surviving streams when `h_t` was estimated.
    pub at_risk: Vec<usize>,
    /// Streams retired before `t`; `at_risk + retired == replications`.
    pub retired: Vec<usize>,
    /// SHA-256 over the table serialized with an empty checksum.
    pub checksum: String,
}

impl CriticalValueTable {
    /// Critical value at `t`, linearly interpolated between knots.
    pub fn threshold(&self, t: usize) -> Option<f64> {
        if t < self.t_min || t > self.t_max {
            return None;
        }
        match self.knots.binary_search(&t) {
            Ok(i) => self.values.get(i).copied(),
            Err(i) => {
                if i == 0 || i >= self.knots.len() {
                    return None;
                }
                let (t0, t1) = (self.knots[i - 1] as f64, self.knots[i] as f64);
                let (h0, h1) = (self.values[i - 1], self.values[i]);
                let w = (t as f64 - t0) / (t1 - t0);
                Some(h0 + w * (h1 - h0))
            }
        }
    }

    fn compute_checksum(&self) -> String {
        let mut unsealed = self.clone();
        unsealed.checksum.clear();
        let bytes = serde_json::to_vec(&unsealed).expect("table serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn seal(&mut self) {
        self.checksum = self.compute_checksum();
    }

    pub fn verify(&self) -> Result<()> {
        let found = self.compute_checksum();
        if found != self.checksum {
            return Err(DriftError::ChecksumMismatch {
                expected: self.checksum.clone(),
                found,
            });
        }
        if self.format_version != TABLE_FORMAT_VERSION {
            return Err(DriftError::TableMismatch(format!(
                "unsupported table format version {}",
                self.format_version
            )));
        }
        let n = self.knots.len();
        if n == 0
            || [self.values.len(), self.raw_values.len(), self.at_risk.len(), self.retired.len()]
                .iter()
                .any(|&l| l != n)
        {
            return Err(DriftError::TableMismatch("inconsistent table lengths".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: CriticalValueTable = serde_json::from_str(text)
            .map_err(|e| DriftError::TableMismatch(format!("malformed table: {e}")))?;
        table.verify()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DriftError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            DriftError::TableMismatch(msg) => DriftError::format(path, msg),
            other => other,
        })
    }

    /// Plot data: `t,h_t,raw_h_t,at_risk` at every knot.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,h_t,raw_h_t,at_risk\n");
        for i in 0..self.knots.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.knots[i], self.values[i], self.raw_values[i], self.at_risk[i]
            ));
        }
        out
    }
}

/// Knot positions for `t_min..=t_max`.
pub fn knot_positions(t_min: usize, t_max: usize) -> Vec<usize> {
    let mut knots: Vec<usize> = (t_min..=t_max.min(DENSE_UNTIL)).collect();
    let mut t = *knots.last().unwrap_or(&t_min);
    while t < t_max {
        let next = ((t as f64 * KNOT_RATIO).ceil() as usize).max(t + 1).min(t_max);
        knots.push(next);
        t = next;
    }
    knots
}

/// Pool-adjacent-violators fit of a non-decreasing sequence (equal weights).
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m1, n1) = blocks[blocks.len() - 1];
            let (m0, n0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let n = n0 + n1;
            *blocks.last_mut().unwrap() = ((m0 * n0 as f64 + m1 * n1 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Inputs to [`calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub statistic: Statistic,
    pub alpha: f64,
    /// First `t` with a critical value (the detector's burn-in).
    pub t_min: usize,
    pub t_max: usize,
    pub min_segment: usize,
    pub replications: usize,
    pub seed: u64,
    pub null_distribution: NullDistribution,
    #[serde(default)]
    pub smoothing: Smoothing,
    #[serde(default)]
    pub exec: ExecPolicy,
}

impl CalibrationSpec {
    pub fn new(statistic: Statistic, alpha: f64, t_max: usize, replications: usize, seed: u64) -> Self {
        CalibrationSpec {
            statistic,
            alpha,
            t_min: 25,
            t_max,
            min_segment: 2,
            replications,
            seed,
            null_distribution: NullDistribution::default_for(statistic),
            smoothing: Smoothing::default(),
            exec: ExecPolicy::default(),
        }
    }

    /// Fewest surviving streams allowed when estimating a quantile.
    pub fn required_survivors(&self) -> usize {
        min_survivors(self.alpha)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DriftError::config("alpha must lie in (0, 1)"));
        }
        if self.min_segment < 1 || self.t_min < 2 * self.min_segment {
            return Err(DriftError::config("t_min must be at least 2 * min_segment"));
        }
        if self.t_max < self.t_min {
            return Err(DriftError::config("t_max must be at least t_min"));
        }
        if self.replications == 0 {
            return Err(DriftError::config("replications must be positive"));
        }
        Ok(())
    }
}

/// `100 / alpha`, the survivor floor below which calibration starves.
pub fn min_survivors(alpha: f64) -> usize {
    (100.0 / alpha - 1e-9).ceil() as usize
}

/// Replications that keep [`min_survivors`] streams alive up to `t_max`
/// when every step retires its full `alpha` share, with 5% to spare.
pub fn suggested_replications(alpha: f64, t_min: usize, t_max: usize) -> usize {
    let retiring_steps = t_max.saturating_sub(t_min) as f64;
    let alive = (retiring_steps * (-alpha).ln_1p()).exp();
    (1.05 * min_survivors(alpha) as f64 / alive).ceil() as usize
}

struct NullStream {
    rng: ChaCha8Rng,
    xs: Vec<f64>,
    // Indices of `xs` in ascending order, kept up to date on every draw.
    order: Vec<u32>,
}

impl NullStream {
    fn new(seed: u64, index: usize, capacity: usize) -> Self {
        NullStream {
            rng: stream_rng(seed, index as u64),
            xs: Vec::with_capacity(capacity),
            order: Vec::with_capacity(capacity),
        }
    }

    fn extend_to(&mut self, len: usize, null: NullDistribution) {
        while self.xs.len() < len {
            let x = null.draw(&mut self.rng);
            let xs = &self.xs;
            let pos = self
                .order
                .partition_point(|&i| xs[i as usize].total_cmp(&x).is_le());
            self.order.insert(pos, xs.len() as u32);
            self.xs.push(x);
        }
    }
}

/// The threshold exceeded by an `alpha` share of `ws`: midpoint of the order
/// statistics bracketing the `1 - alpha` empirical quantile.
fn upper_quantile(ws: &[f64], alpha: f64) -> f64 {
    let mut sorted = ws.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let idx = (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n) - 1;
    if idx + 1 < n {
        0.5 * (sorted[idx] + sorted[idx + 1])
    } else {
        sorted[idx]
    }
}

/// Estimates `h_t` for `t_min..=t_max` by conditional Monte Carlo.
pub fn calibrate(spec: &CalibrationSpec) -> Result<CriticalValueTable> {
    spec.validate()?;
    let required = spec.required_survivors();
    let null = spec.null_distribution;
    let (stat, min_segment) = (spec.statistic, spec.min_segment);

    let mut streams = map_indices(spec.exec, spec.replications, |i| {
        let mut s = NullStream::new(spec.seed, i, spec.t_max);
        s.extend_to(spec.t_min - 1, null);
        s
    });

    let n_steps = spec.t_max - spec.t_min + 1;
    let mut raw = Vec::with_capacity(n_steps);
    let mut at_risk = Vec::with_capacity(n_steps);
    let mut retired_before = Vec::with_capacity(n_steps);
    let mut retired = 0usize;

    for t in spec.t_min..=spec.t_max {
        if streams.len() < required {
            return Err(DriftError::Starvation {
                t,
                survivors: streams.len(),
                required,
            });
        }
        let ws = map_mut_with(spec.exec, &mut streams, SplitScanner::new, |scanner, s| {
            s.extend_to(t, null);
            scanner
                .max_split_sorted(&s.xs, &s.order, stat, min_segment)
                .expect("t >= 2 * min_segment")
                .value
        });
        let h = upper_quantile(&ws, spec.alpha);
        raw.push(h);
        at_risk.push(streams.len());
        retired_before.push(retired);

        let mut idx = 0;
        streams.retain(|_| {
            let keep = ws[idx] <= h;
            idx += 1;
            keep
        });
        retired += ws.len() - streams.len();
    }

    let smoothed = match spec.smoothing {
        Smoothing::Isotonic => isotonic_non_decreasing(&raw),
        Smoothing::None => raw.clone(),
    };
    let knots = knot_positions(spec.t_min, spec.t_max);
    let pick = |v: &[f64]| -> Vec<f64> { knots.iter().map(|&t| v[t - spec.t_min]).collect() };
    let pick_n = |v: &[usize]| -> Vec<usize> { knots.iter().map(|&t| v[t - spec.t_min]).collect() };

    let mut table = CriticalValueTable {
        format_version: TABLE_FORMAT_VERSION,
        statistic: stat,
        alpha: spec.alpha,
        min_segment,
        t_min: spec.t_min,
        t_max: spec.t_max,
        replications: spec.replications,
        seed: spec.seed,
        null_distribution: null,
        interpolation: Interpolation::default(),
        smoothing: spec.smoothing,
        values: pick(&smoothed),
        raw_values: pick(&raw),
        at_risk: pick_n(&at_risk),
        retired: pick_n(&retired_before),
        knots,
        checksum: String::new(),
    };
    table.seal();
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    /// Some steps alarm significantly less often than alpha.
    FailLow,
    /// Some steps alarm significantly more often than alpha.
    FailHigh,
    FailMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub t: usize,
    pub at_risk: usize,
    pub alarms: usize,
    pub rate: f64,
    /// Binomial standard error under the nominal alpha.
    pub se: f64,
    /// Wilson 95% interval of the rate.
    pub ci_low: f64,
    pub ci_high: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub statistic: Statistic,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    /// True when validation reused the calibration seed (not independent).
    pub seed_reused: bool,
    pub rows: Vec<ValidationRow>,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Replays a table against fresh null streams and reports the conditional
/// alarm rate at every `t`. Passes iff every rate is within three binomial
/// standard errors of alpha.
pub fn validate_table(
    table: &CriticalValueTable,
    replications: usize,
    seed: u64,
    exec: ExecPolicy,
) -> ValidationReport {
    let null = table.null_distribution;
    let (stat, min_segment, alpha) = (table.statistic, table.min_segment, table.alpha);
    let mut streams = map_indices(exec, replications, |i| {
        let mut s = NullStream::new(seed, i, table.t_max);
        s.extend_to(table.t_min - 1, null);
        s
    });

    let mut rows = Vec::new();
    let (mut low, mut high) = (false, false);
    for t in table.t_min..=table.t_max {
        let n = streams.len();
        if n == 0 {
            break;
        }
        let h = table.threshold(t).expect("t within table range");
        let alarmed = map_mut_with(exec, &mut streams, SplitScanner::new, |scanner, s| {
            s.extend_to(t, null);
            scanner
                .max_split_sorted(&s.xs, &s.order, stat, min_segment)
                .is_some_and(|m| m.value > h)
        });
        let alarms = alarmed.iter().filter(|&&a| a).count();
        let rate = alarms as f64 / n as f64;
        let se = (alpha * (1.0 - alpha) / n as f64).sqrt();
        let within = (rate - alpha).abs() <= 3.0 * se;
        if !within {
            if rate < alpha {
                low = true;
            } else {
                high = true;
            }
        }
        let (ci_low, ci_high) = wilson(alarms, n, 1.96);
        rows.push(ValidationRow {
            t,
            at_risk: n,
            alarms,
            rate,
            se,
            ci_low,
            ci_high,
            within_3se: within,
        });
        let mut idx = 0;
        streams.retain(|_| {
            let keep = !alarmed[idx];
            idx += 1;
            keep
        });
    }

    let verdict = match (low, high) {
        (false, false) => Verdict::Pass,
        (true, false) => Verdict::FailLow,
        (false, true) => Verdict::FailHigh,
        (true, true) => Verdict::FailMixed,
    };
    ValidationReport {
        statistic: stat,
        alpha,
        replications,
        seed,
        seed_reused: seed == table.seed,
        rows,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pava_examples() {
        assert_eq!(isotonic_non_decreasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_non_decreasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_non_decreasing(&[]), Vec::<f64>::new());
    }

    #[test]
    fn knots_dense_then_geometric() {
        let k = knot_positions(25, 120);
        assert_eq!(k, (25..=120).collect::<Vec<_>>());
        let k = knot_positions(25, 400);
        assert_eq!(k[..176], (25..=200).collect::<Vec<_>>()[..]);
        assert_eq!(*k.last().unwrap(), 400);
        assert!(k.windows(2).all(|w| w[0] < w[1]));
        assert!(k.len() < 176 + 20);
    }

    #[test]
    fn interpolation_between_knots() {
        let mut table = tiny_table();
        table.knots = vec![25, 30];
        table.values = vec![1.0, 2.0];
        table.raw_values = table.values.clone();
        table.at_risk = vec![1, 1];
        table.retired = vec![0, 0];
        table.t_max = 30;
        assert_eq!(table.threshold(25), Some(1.0));
        assert!((table.threshold(27).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(table.threshold(31), None);
        assert_eq!(table.threshold(24), None);
    }

    #[test]
    fn quantile_exceedance_at_most_alpha() {
        let ws: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let h = upper_quantile(&ws, 0.05);
        assert_eq!(ws.iter().filter(|&&w| w > h).count(), 50);
    }

    #[test]
    fn survivor_floor() {
        assert_eq!(min_survivors(0.05), 2000);
        assert_eq!(min_survivors(0.01), 10000);
    }

    #[test]
    fn starvation_is_reported() {
        let spec = CalibrationSpec {
            t_min: 10,
            ..CalibrationSpec::new(Statistic::MannWhitney, 0.05, 20, 500, 1)
        };
        assert!(matches!(
            calibrate(&spec),
            Err(DriftError::Starvation { t: 10, survivors: 500, required: 2000 })
        ));
    }

    #[test]
    fn suggested_replications_do_not_starve() {
        let n = suggested_replications(0.1, 10, 30);
        assert!(n > 1000 && n < 2 * 1000 * 9);
        let spec = CalibrationSpec {
            t_min: 10,
            ..CalibrationSpec::new(Statistic::CramerVonMises, 0.1, 30, n, 4)
        };
        assert!(calibrate(&spec).is_ok());
    }

    #[test]
    fn checksum_binds_values() {
        let spec = CalibrationSpec {
            t_min: 6,
            ..CalibrationSpec::new(Statistic::CramerVonMises, 0.2, 10, 3000, 9)
        };
        let table = calibrate(&spec).unwrap();
        let text = table.to_json();
        assert_eq!(CriticalValueTable::from_json(&text).unwrap(), table);
        let mut tampered = table.clone();
        tampered.values[0] += 0.5;
        assert!(matches!(
            CriticalValueTable::from_json(&tampered.to_json()),
            Err(DriftError::ChecksumMismatch { .. })
        ));
    }

    fn tiny_table() -> CriticalValueTable {
        CriticalValueTable {
            format_version: TABLE_FORMAT_VERSION,
            statistic: Statistic::CramerVonMises,
            alpha: 0.05,
            min_segment: 2,
            t_min: 25,
            t_max: 25,
            replications: 1,
            seed: 0,
            null_distribution: NullDistribution::Uniform,
            interpolation: Interpolation::default(),
            smoothing: Smoothing::Isotonic,
            knots: vec![25],
            values: vec![1.0],
            raw_values: vec![1.0],
            at_risk: vec![1],
            retired: vec![0],
            checksum: String::new(),
        }
    }
}
