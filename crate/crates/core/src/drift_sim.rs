//! Synthetic drift scenarios and the repeated-testing ("peeking") experiment.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution as _, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::calibration::stream_rng;
use crate::divergence::DivergenceSeries;
use crate::error::{DriftError, Result};
use crate::exec::{map_indices, ExecPolicy};
use crate::two_sample::student_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Step,
    Linear,
    Custom,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Step => "step",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Custom => "custom",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "step" => Ok(ScheduleKind::Step),
            "linear" => Ok(ScheduleKind::Linear),
            "custom" => Ok(ScheduleKind::Custom),
            other => Err(DriftError::config(format!("unknown schedule '{other}'"))),
        }
    }
}

/// Drift-class proportions over the windows `t_start..=n_windows`.
///
/// `p[j - 1]` is the contamination at window `t_start + j - 1`; windows
/// before `t_start` are uncontaminated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSchedule {
    pub n_windows: usize,
    pub t_start: usize,
    pub t_end: usize,
    pub p: Vec<f64>,
    pub kind: ScheduleKind,
}

impl ContaminationSchedule {
    /// Full contamination from `t_start` on.
    pub fn step(n_windows: usize, t_start: usize) -> Result<Self> {
        Self::check_bounds(n_windows, t_start, t_start)?;
        Ok(ContaminationSchedule {
            n_windows,
            t_start,
            t_end: t_start,
            p: vec![1.0; n_windows - t_start + 1],
            kind: ScheduleKind::Step,
        })
    }

    /// Proportion `j / (t_end - t_start + 1)` at the `j`-th drifted window,
    /// saturating at 1 after `t_end`.
    pub fn linear(n_windows: usize, t_start: usize, t_end: usize) -> Result<Self> {
        Self::check_bounds(n_windows, t_start, t_end)?;
        let ramp = (t_end - t_start + 1) as f64;
        let p = (1..=n_windows - t_start + 1)
            .map(|j| (j as f64 / ramp).min(1.0))
            .collect();
        Ok(ContaminationSchedule {
            n_windows,
            t_start,
            t_end,
            p,
            kind: ScheduleKind::Linear,
        })
    }

    pub fn custom(n_windows: usize, t_start: usize, t_end: usize, p: Vec<f64>) -> Result<Self> {
        Self::check_bounds(n_windows, t_start, t_end)?;
        if p.len() != n_windows - t_start + 1 {
            return Err(DriftError::config(format!(
                "custom schedule needs {} proportions, got {}",
                n_windows - t_start + 1,
                p.len()
            )));
        }
        if p.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(DriftError::config("proportions must lie in (0, 1]"));
        }
        Ok(ContaminationSchedule {
            n_windows,
            t_start,
            t_end,
            p,
            kind: ScheduleKind::Custom,
        })
    }

    pub fn new(kind: ScheduleKind, n_windows: usize, t_start: usize, t_end: usize) -> Result<Self> {
        match kind {
            ScheduleKind::Step => Self::step(n_windows, t_start),
            ScheduleKind::Linear => Self::linear(n_windows, t_start, t_end),
            ScheduleKind::Custom => Err(DriftError::config(
                "custom schedules need explicit proportions",
            )),
        }
    }

    fn check_bounds(n_windows: usize, t_start: usize, t_end: usize) -> Result<()> {
        if !(1 <= t_start && t_start <= t_end && t_end <= n_windows) {
            return Err(DriftError::config(format!(
                "need 1 <= t_start ({t_start}) <= t_end ({t_end}) <= n_windows ({n_windows})"
            )));
        }
        Ok(())
    }

    /// Contamination at window `t` (1-based).
    pub fn proportion_at(&self, t: usize) -> f64 {
        if t < self.t_start || t > self.n_windows {
            0.0
        } else {
            self.p[t - self.t_start]
        }
    }
}

/// One-dimensional distribution with closed-form mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
}

impl Distribution {
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Normal { mean, .. } => mean,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(DriftError::config(format!("invalid distribution {self:?}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Distribution::Uniform { low, high } => Uniform::new(low, high).expect("validated").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub null_distribution: Distribution,
    pub drift_distribution: Distribution,
    pub schedule: ContaminationSchedule,
    pub batch_size: usize,
    pub seed: u64,
}

impl StreamSpec {
    /// N(0,1) null, N(shift,1) drift, batch size 16.
    pub fn normal_shift(schedule: ContaminationSchedule, shift: f64, seed: u64) -> Self {
        StreamSpec {
            null_distribution: Distribution::Normal { mean: 0.0, sd: 1.0 },
            drift_distribution: Distribution::Normal { mean: shift, sd: 1.0 },
            schedule,
            batch_size: 16,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.null_distribution.validate()?;
        self.drift_distribution.validate()?;
        if self.batch_size == 0 {
            return Err(DriftError::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// A synthetic series with the schedule that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub series: DivergenceSeries,
    pub schedule: ContaminationSchedule,
}

/// Draws each window's `batch_size` values from the drift distribution with
/// the window's contamination probability (else from the null) and emits
/// the window mean.
pub fn synth_divergence_series(spec: &StreamSpec) -> Result<SyntheticScenario> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let sched = &spec.schedule;
    let mut values = Vec::with_capacity(sched.n_windows);
    for t in 1..=sched.n_windows {
        let p = sched.proportion_at(t);
        let mut sum = 0.0;
        for _ in 0..spec.batch_size {
            let drifted = p > 0.0 && rng.random::<f64>() < p;
            let d = if drifted {
                &spec.drift_distribution
            } else {
                &spec.null_distribution
            };
            sum += d.sample(&mut rng);
        }
        values.push(sum / spec.batch_size as f64);
    }
    Ok(SyntheticScenario {
        series: DivergenceSeries {
            values,
            metric: None,
        },
        schedule: sched.clone(),
    })
}

/// One-sample t test of `mean = 0`, returning `(t, two-sided p)`.
pub fn one_sample_t(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var / n).sqrt();
    (t, student_two_sided_p(t, n - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeekingConfig {
    pub n: usize,
    pub replications: usize,
    pub alphas: Vec<f64>,
    pub min_prefix: usize,
    pub seed: u64,
    #[serde(default)]
    pub exec: ExecPolicy,
}

impl Default for PeekingConfig {
    fn default() -> Self {
        PeekingConfig {
            n: 100,
            replications: 10_000,
            alphas: vec![0.05, 0.01, 0.005, 0.001],
            min_prefix: 20,
            seed: 0,
            exec: ExecPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeekingRow {
    pub alpha: f64,
    /// Share of replications with at least one rejection.
    pub prob_any_rejection: f64,
    /// Mean number of rejecting prefixes.
    pub expected_rejections: f64,
}

/// Tests every prefix `x_1..x_j`, `j = min_prefix..=n`, of iid N(0,1)
/// samples with a one-sample t test and counts rejections per alpha.
pub fn peeking_experiment(cfg: &PeekingConfig) -> Result<Vec<PeekingRow>> {
    if cfg.min_prefix < 2 || cfg.n < cfg.min_prefix {
        return Err(DriftError::config("need 2 <= min_prefix <= n"));
    }
    if cfg.replications == 0 {
        return Err(DriftError::config("replications must be positive"));
    }
    let alphas = &cfg.alphas;
    // Per replication: rejection count for each alpha.
    let counts: Vec<Vec<u32>> = map_indices(cfg.exec, cfg.replications, |r| {
        let mut rng = stream_rng(cfg.seed, r as u64);
        let xs: Vec<f64> = (0..cfg.n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let mut v = vec![0u32; alphas.len()];
        let (mut s1, mut s2) = (0.0, 0.0);
        for (j, &x) in xs.iter().enumerate() {
            s1 += x;
            s2 += x * x;
            let len = j + 1;
            if len < cfg.min_prefix {
                continue;
            }
            let nf = len as f64;
            let mean = s1 / nf;
            let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
            let t = mean / (var / nf).sqrt();
            let p = student_two_sided_p(t, nf - 1.0);
            for (c, &a) in v.iter_mut().zip(alphas) {
                if p < a {
                    *c += 1;
                }
            }
        }
        v
    });
    let r = cfg.replications as f64;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| PeekingRow {
            alpha,
            prob_any_rejection: counts.iter().filter(|c| c[i] > 0).count() as f64 / r,
            expected_rejections: counts.iter().map(|c| c[i] as f64).sum::<f64>() / r,
        })
        .collect())
}

/// `1 - (1 - alpha)^w`: chance that at least one of `w` independent
/// level-`alpha` tests rejects a true null.
pub fn nonoverlap_inflation(w: u32, alpha: f64) -> f64 {
    -(f64::from(w) * (-alpha).ln_1p()).exp_m1()
}
