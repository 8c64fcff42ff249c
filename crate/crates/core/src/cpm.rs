//! Sequential change point model.
//!
//! At every time `t` past the burn-in, the whole history `x_1..x_t` is split
//! at each admissible `k` into `x_1..x_k` and `x_{k+1}..x_t`. The standardized
//! two-sample statistic is maximized over `k`; an alarm is raised when the
//! maximum exceeds the calibrated critical value `h_t`.
//!
//! The scan over `k` is incremental: for the Cramér-von Mises statistic the
//! sums it needs are updated with Fenwick trees as points move from the
//! second sample into the first, giving `O(t log t)` per step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calibration::CriticalValueTable;
use crate::error::{DriftError, Result};
use crate::fenwick::Fenwick;
use crate::outcome::DetectionOutcome;
use crate::two_sample::{
    cvm_from_sum, cvm_null_moments, ks_from_max, ks_normalize, mw_normalize, PooledRanks, Statistic,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmConfig {
    /// Conditional false-alarm probability per step.
    pub alpha: f64,
    /// No test before `t = burn_in`.
    pub burn_in: usize,
    pub statistic: Statistic,
    /// Minimum size of each side of a split.
    pub min_segment: usize,
}

impl Default for CpmConfig {
    fn default() -> Self {
        CpmConfig {
            alpha: 0.05,
            burn_in: 25,
            statistic: Statistic::CramerVonMises,
            min_segment: 2,
        }
    }
}

impl CpmConfig {
    /// Per-step conditional alpha from an in-control average run length.
    pub fn with_arl0(mut self, arl0: f64) -> Self {
        self.alpha = 1.0 / arl0;
        self
    }

    pub fn arl0(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DriftError::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.min_segment < 1 {
            return Err(DriftError::config("min_segment must be at least 1"));
        }
        if self.burn_in < 2 * self.min_segment {
            return Err(DriftError::config(format!(
                "burn_in ({}) must be at least 2 * min_segment ({})",
                self.burn_in, self.min_segment
            )));
        }
        Ok(())
    }

    /// Checks that a critical value table was calibrated for this detector.
    pub fn check_table(&self, table: &CriticalValueTable) -> Result<()> {
        if table.statistic != self.statistic {
            return Err(DriftError::TableMismatch(format!(
                "table statistic {} vs detector {}",
                table.statistic, self.statistic
            )));
        }
        if table.min_segment != self.min_segment {
            return Err(DriftError::TableMismatch(format!(
                "table min_segment {} vs detector {}",
                table.min_segment, self.min_segment
            )));
        }
        // The table's conditioning starts at its first step, which must be
        // the detector's first test.
        if table.t_min != self.burn_in {
            return Err(DriftError::TableMismatch(format!(
                "table starts at t = {} but burn-in is {}",
                table.t_min, self.burn_in
            )));
        }
        if (table.alpha - self.alpha).abs() > 1e-12 * self.alpha.max(table.alpha) {
            return Err(DriftError::TableMismatch(format!(
                "table alpha {} vs detector {}",
                table.alpha, self.alpha
            )));
        }
        Ok(())
    }
}

/// One step of the change point model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmStep {
    pub t: usize,
    /// Maximum standardized split statistic; 0 during burn-in.
    pub w_t: f64,
    /// Split maximizing the statistic (last index of the first segment).
    pub tau_hat: Option<usize>,
    pub h_t: Option<f64>,
    pub alarmed: bool,
    /// False while still inside the burn-in period.
    pub testable: bool,
}

/// Maximum of the split statistic over admissible splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMax {
    pub value: f64,
    /// Size of the first segment at the maximum (smallest on ties).
    pub tau: usize,
}

/// Reusable scratch space for [`SplitScanner::max_split`].
#[derive(Debug, Default, Clone)]
pub struct SplitScanner {
    ranks: PooledRanks,
    count_tree: Fenwick,
    start_tree: Fenwick,
    suffix_r: Vec<u64>,
    group_index: Vec<u32>,
    group_end: Vec<u64>,
    group_hits: Vec<u64>,
    prefix: Vec<(f64, f64)>,
    suffix: Vec<(f64, f64)>,
    // Null mean and sd of the CvM statistic for each split of `moments_t`.
    moments: Vec<(f64, f64)>,
    moments_t: usize,
}

impl SplitScanner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Max over `k in [min_segment, t - min_segment]` of the standardized
    /// statistic comparing `xs[..k]` with `xs[k..]`. Mann-Whitney and Student
    /// use the absolute standardized value. `None` if no split is admissible.
    pub fn max_split(
        &mut self,
        xs: &[f64],
        statistic: Statistic,
        min_segment: usize,
    ) -> Option<SplitMax> {
        let t = xs.len();
        let min_segment = min_segment.max(1);
        if t < 2 * min_segment {
            return None;
        }
        if statistic.is_rank_based() {
            self.ranks.compute(xs);
        }
        self.dispatch(xs, statistic, min_segment)
    }

    /// [`max_split`](Self::max_split) with `order` giving the indices of `xs`
    /// in ascending `total_cmp` order.
    pub(crate) fn max_split_sorted(
        &mut self,
        xs: &[f64],
        order: &[u32],
        statistic: Statistic,
        min_segment: usize,
    ) -> Option<SplitMax> {
        let t = xs.len();
        let min_segment = min_segment.max(1);
        if t < 2 * min_segment {
            return None;
        }
        if statistic.is_rank_based() {
            self.ranks.compute_sorted(xs, order);
        }
        self.dispatch(xs, statistic, min_segment)
    }

    fn dispatch(&mut self, xs: &[f64], statistic: Statistic, min_segment: usize) -> Option<SplitMax> {
        match statistic {
            Statistic::CramerVonMises => self.scan_cvm(xs, min_segment),
            Statistic::MannWhitney => self.scan_mw(xs, min_segment),
            Statistic::KolmogorovSmirnov => self.scan_ks(xs, min_segment),
            Statistic::Student => self.scan_student(xs, min_segment),
        }
    }

    fn scan_cvm(&mut self, xs: &[f64], min_segment: usize) -> Option<SplitMax> {
        let t = xs.len();
        if self.moments_t != t {
            self.moments.clear();
            self.moments.push((f64::NAN, f64::NAN));
            self.moments.extend((1..t).map(|k| cvm_null_moments(k, t - k)));
            self.moments_t = t;
        }
        let ranks = &self.ranks;

        // R at each sorted position, suffix sums of R, and sum of R^2.
        self.suffix_r.clear();
        self.suffix_r.resize(t + 1, 0);
        let mut q3: u128 = 0;
        for p in (0..t).rev() {
            let r = ranks.end[ranks.order()[p] as usize] as u64;
            self.suffix_r[p] = self.suffix_r[p + 1] + r;
            q3 += (r as u128) * (r as u128);
        }

        self.count_tree.reset(t);
        self.start_tree.reset(t);
        let tt = t as u128;
        let mut q1: u128 = 0; // sum over positions of A^2
        let mut q2: u128 = 0; // sum over positions of A R
        let mut start_total: u64 = 0;
        let mut best: Option<SplitMax> = None;

        for k in 1..=(t - min_segment) {
            let g = ranks.start[k - 1] as usize;
            let added = (k - 1) as u64;
            // Sum of A over positions >= g before adding: every earlier item j
            // contributes t - max(g, g_j).
            let le = self.count_tree.prefix(g);
            let start_le = self.start_tree.prefix(g);
            let gt = added - le;
            let start_gt = start_total - start_le;
            let sum_a = le * (t - g) as u64 + gt * t as u64 - start_gt;
            q1 += 2 * sum_a as u128 + (t - g) as u128;
            q2 += self.suffix_r[g] as u128;
            self.count_tree.add(g, 1);
            self.start_tree.add(g, g as u64);
            start_total += g as u64;

            if k >= min_segment {
                let kk = k as u128;
                let num = tt * tt * q1 + kk * kk * q3 - 2 * tt * kk * q2;
                let (mean, sd) = self.moments[k];
                let w = (cvm_from_sum(num, k, t - k) - mean) / sd;
                update_best(&mut best, w, k);
            }
        }
        best
    }

    fn scan_mw(&mut self, xs: &[f64], min_segment: usize) -> Option<SplitMax> {
        let t = xs.len();
        let mut rank_sum2: i64 = 0;
        let mut best = None;
        for k in 1..=(t - min_segment) {
            rank_sum2 += self.ranks.doubled_rank(k - 1) as i64;
            if k >= min_segment {
                let u2 = rank_sum2 - (k * (k + 1)) as i64;
                let w = mw_normalize(u2, k, t - k, self.ranks.tie_sum).abs();
                update_best(&mut best, w, k);
            }
        }
        best
    }

    fn scan_ks(&mut self, xs: &[f64], min_segment: usize) -> Option<SplitMax> {
        let t = xs.len();
        let ranks = &self.ranks;
        self.group_index.clear();
        self.group_index.resize(t, 0);
        self.group_end.clear();
        let mut p = 0;
        while p < t {
            let end = ranks.end[ranks.order()[p] as usize] as usize;
            let g = self.group_end.len() as u32;
            for &i in &ranks.order()[p..end] {
                self.group_index[i as usize] = g;
            }
            self.group_end.push(end as u64);
            p = end;
        }
        self.group_hits.clear();
        self.group_hits.resize(self.group_end.len(), 0);

        let tt = t as i64;
        let mut best = None;
        for k in 1..=(t - min_segment) {
            self.group_hits[self.group_index[k - 1] as usize] += 1;
            if k < min_segment {
                continue;
            }
            let kk = k as i64;
            let mut a = 0i64;
            let mut max_dev = 0u64;
            for (hits, &r) in self.group_hits.iter().zip(&self.group_end) {
                a += *hits as i64;
                max_dev = max_dev.max((tt * a - kk * r as i64).unsigned_abs());
            }
            let w = ks_normalize(ks_from_max(max_dev, k, t - k), k, t - k);
            update_best(&mut best, w, k);
        }
        best
    }

    fn scan_student(&mut self, xs: &[f64], min_segment: usize) -> Option<SplitMax> {
        let t = xs.len();
        // Welford passes in both directions: (mean, sum of squared deviations)
        // of xs[..k] in prefix[k] and of xs[k..] in suffix[k]. Constant runs
        // give exactly zero spread, so degenerate splits are detected exactly.
        let welford = |acc: (f64, f64), i: usize, x: f64| {
            let (mean, m2) = acc;
            let d = x - mean;
            let mean = mean + d / i as f64;
            (mean, m2 + d * (x - mean))
        };
        self.prefix.clear();
        self.prefix.push((0.0, 0.0));
        let mut acc = (0.0, 0.0);
        for (i, &x) in xs.iter().enumerate() {
            acc = welford(acc, i + 1, x);
            self.prefix.push(acc);
        }
        self.suffix.clear();
        self.suffix.resize(t + 1, (0.0, 0.0));
        let mut acc = (0.0, 0.0);
        for (i, &x) in xs.iter().enumerate().rev() {
            acc = welford(acc, t - i, x);
            self.suffix[i] = acc;
        }

        let mut best = None;
        for k in min_segment..=(t - min_segment) {
            let (mean0, ss0) = self.prefix[k];
            let (mean1, ss1) = self.suffix[k];
            let (m, n) = (k as f64, (t - k) as f64);
            let pooled = (ss0 + ss1) / (t as f64 - 2.0);
            let diff = (mean0 - mean1).abs();
            let w = if pooled > 0.0 {
                diff / (pooled * (1.0 / m + 1.0 / n)).sqrt()
            } else if diff > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            update_best(&mut best, w, k);
        }
        best
    }
}

fn update_best(best: &mut Option<SplitMax>, value: f64, k: usize) {
    match best {
        Some(b) if value <= b.value => {}
        _ => *best = Some(SplitMax { value, tau: k }),
    }
}

/// Serializable detector state: configuration plus every observation seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpmState {
    pub config: CpmConfig,
    pub observations: Vec<f64>,
    /// First alarm as `(t, tau_hat)`, once raised.
    pub alarm: Option<(usize, usize)>,
}

/// Streaming change point detector.
#[derive(Debug, Clone)]
pub struct CpmDetector {
    state: CpmState,
    table: Arc<CriticalValueTable>,
    scanner: SplitScanner,
}

impl CpmDetector {
    pub fn new(config: CpmConfig, table: Arc<CriticalValueTable>) -> Result<Self> {
        Self::resume(
            CpmState {
                config,
                observations: Vec::new(),
                alarm: None,
            },
            table,
        )
    }

    /// Restores a detector from a snapshot taken with [`CpmDetector::snapshot`].
    pub fn resume(state: CpmState, table: Arc<CriticalValueTable>) -> Result<Self> {
        state.config.validate()?;
        state.config.check_table(&table)?;
        Ok(CpmDetector {
            state,
            table,
            scanner: SplitScanner::new(),
        })
    }

    pub fn snapshot(&self) -> CpmState {
        self.state.clone()
    }

    pub fn config(&self) -> &CpmConfig {
        &self.state.config
    }

    pub fn t(&self) -> usize {
        self.state.observations.len()
    }

    pub fn alarm(&self) -> Option<(usize, usize)> {
        self.state.alarm
    }

    /// Feeds the next observation.
    pub fn step(&mut self, x: f64) -> Result<CpmStep> {
        let t = self.state.observations.len() + 1;
        if !x.is_finite() {
            return Err(DriftError::NonFinite { index: t, value: x });
        }
        let cfg = self.state.config;
        if t >= cfg.burn_in {
            // Fail before mutating so a missing threshold leaves state intact.
            let h = self.table.threshold(t).ok_or(DriftError::ThresholdMissing {
                t,
                t_min: self.table.t_min,
                t_max: self.table.t_max,
            })?;
            self.state.observations.push(x);
            let split = self
                .scanner
                .max_split(&self.state.observations, cfg.statistic, cfg.min_segment)
                .expect("burn_in >= 2 * min_segment");
            let alarmed = split.value > h;
            if alarmed && self.state.alarm.is_none() {
                self.state.alarm = Some((t, split.tau));
            }
            Ok(CpmStep {
                t,
                w_t: split.value,
                tau_hat: Some(split.tau),
                h_t: Some(h),
                alarmed,
                testable: true,
            })
        } else {
            self.state.observations.push(x);
            Ok(CpmStep {
                t,
                w_t: 0.0,
                tau_hat: None,
                h_t: None,
                alarmed: false,
                testable: false,
            })
        }
    }

    pub fn outcome(&self) -> DetectionOutcome {
        match self.state.alarm {
            Some((t, tau)) => DetectionOutcome {
                detection_time: Some(t),
                estimated_changepoint: Some(tau),
                alarm_times: vec![t],
            },
            None => DetectionOutcome::never(),
        }
    }
}

/// Runs the detector over a series, stopping at the first alarm.
pub fn cpm_detect(
    series: &[f64],
    config: &CpmConfig,
    table: &Arc<CriticalValueTable>,
) -> Result<DetectionOutcome> {
    Ok(cpm_trace(series, config, table)?.1)
}

/// Like [`cpm_detect`] but also returns every step record up to the alarm.
pub fn cpm_trace(
    series: &[f64],
    config: &CpmConfig,
    table: &Arc<CriticalValueTable>,
) -> Result<(Vec<CpmStep>, DetectionOutcome)> {
    let mut det = CpmDetector::new(*config, Arc::clone(table))?;
    let mut steps = Vec::with_capacity(series.len());
    for &x in series {
        let step = det.step(x)?;
        steps.push(step);
        if step.alarmed {
            break;
        }
    }
    Ok((steps, det.outcome()))
}
