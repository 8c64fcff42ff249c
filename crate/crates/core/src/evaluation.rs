//! Contamination-aware scoring of detector alarm histories.
//!
//! A false alarm costs `c1`. A miss costs `c2`. A true detection after `m`
//! drifted windows costs
//!
//! ```text
//! g = c2 - kappa * c2 / prod_{j=1..m} (1 + p_j)^((m - j) / m)
//! ```
//!
//! which is `(1 - kappa) c2` for an immediate detection and decays towards
//! `c2` faster the more contamination has been on display.

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::exec::{map_indices, ExecPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    /// Cost of each false alarm (`<= 0`).
    pub c1: f64,
    /// Largest cost of a late true detection, and of a miss (`<= 0`).
    pub c2: f64,
    /// Decay control in `[0, 1]`.
    pub kappa: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            c1: -0.5,
            c2: -0.5,
            kappa: 1.0,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 <= 0.0 && self.c2 <= 0.0) {
            return Err(DriftError::config("penalties c1 and c2 must be <= 0"));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(DriftError::config("kappa must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Penalty `g(t_s, t_d, p)` for a single alarm; `t_d = None` is a miss.
pub fn penalty(t_s: usize, t_d: Option<usize>, p: &[f64], params: &PenaltyParams) -> Result<f64> {
    params.validate()?;
    let t_d = match t_d {
        None => return Ok(params.c2),
        Some(t) if t < t_s => return Ok(params.c1),
        Some(t) => t,
    };
    let m = t_d - t_s + 1;
    if p.len() < m {
        return Err(DriftError::ScheduleTooShort {
            required: m,
            available: p.len(),
        });
    }
    if let Some(bad) = p[..m].iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(DriftError::config(format!(
            "contamination proportions must lie in (0, 1], got {bad}"
        )));
    }
    let mf = m as f64;
    let log_prod: f64 = p[..m]
        .iter()
        .enumerate()
        .map(|(j0, &pj)| (mf - (j0 + 1) as f64) / mf * pj.ln_1p())
        .sum();
    Ok(params.c2 - params.kappa * params.c2 * (-log_prod).exp())
}

fn check_increasing(alarms: &[usize]) -> Result<()> {
    if alarms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DriftError::config("alarm times must be strictly increasing"));
    }
    Ok(())
}

/// Sum of penalties over every false alarm plus the first true detection.
/// Later alarms are ignored; no true detection adds the miss penalty `c2`.
pub fn total_loss(t_s: usize, alarms: &[usize], p: &[f64], params: &PenaltyParams) -> Result<f64> {
    check_increasing(alarms)?;
    let false_alarms = alarms.iter().take_while(|&&t| t < t_s).count();
    let detection = alarms.get(false_alarms).copied();
    Ok(false_alarms as f64 * penalty(t_s, Some(0), p, params)?
        + penalty(t_s, detection, p, params)?)
}

/// `F / (F + I)` with `F` false alarms and `I` one if any alarm is at or
/// after `t_s`. Undefined (`None`) without any alarm.
pub fn false_alarm_rate(t_s: usize, alarms: &[usize]) -> Option<f64> {
    let f = alarms.iter().filter(|&&t| t < t_s).count();
    let i = usize::from(alarms.iter().any(|&t| t >= t_s));
    if f + i == 0 {
        None
    } else {
        Some(f as f64 / (f + i) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScore {
    pub detected: bool,
    /// `t_d - t_s + 1` for the first true detection.
    pub delay: Option<usize>,
    pub false_alarm_count: usize,
    pub theta: Option<f64>,
    pub loss: f64,
}

pub fn score(t_s: usize, alarms: &[usize], p: &[f64], params: &PenaltyParams) -> Result<ScenarioScore> {
    let loss = total_loss(t_s, alarms, p, params)?;
    let false_alarm_count = alarms.iter().filter(|&&t| t < t_s).count();
    let delay = alarms.iter().find(|&&t| t >= t_s).map(|&t| t - t_s + 1);
    Ok(ScenarioScore {
        detected: delay.is_some(),
        delay,
        false_alarm_count,
        theta: false_alarm_rate(t_s, alarms),
        loss,
    })
}

/// `g` for every detection time `1..=n_windows` (plot data).
pub fn penalty_curve(
    t_s: usize,
    n_windows: usize,
    p: &[f64],
    params: &PenaltyParams,
) -> Result<Vec<(usize, f64)>> {
    (1..=n_windows)
        .map(|t_d| Ok((t_d, penalty(t_s, Some(t_d), p, params)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorAlarms {
    pub detector: String,
    pub alarm_times: Vec<usize>,
}

/// Ground truth plus each detector's alarms for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredScenario {
    pub name: String,
    pub t_start: usize,
    pub p: Vec<f64>,
    pub detectors: Vec<DetectorAlarms>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c1: f64,
    pub c2: f64,
    /// Mean loss per detector, in [`SweepResult::detectors`] order.
    pub losses: Vec<f64>,
    /// Detector with the highest (least negative) mean loss.
    pub best: String,
}

/// Contiguous stretch of the grid won by one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerRegion {
    pub detector: String,
    /// `|c1|` at the first and last grid point of the stretch.
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub detectors: Vec<String>,
    pub points: Vec<SweepPoint>,
    pub regions: Vec<WinnerRegion>,
}

/// Mean loss per detector over `grid` points with `c1 = -x`, `c2 = -(1 - x)`,
/// `x` evenly spaced in `[0, 1]`.
pub fn c1_c2_sweep(
    scenarios: &[ScoredScenario],
    grid: usize,
    kappa: f64,
    exec: ExecPolicy,
) -> Result<SweepResult> {
    let first = scenarios
        .first()
        .ok_or_else(|| DriftError::config("sweep needs at least one scenario"))?;
    if grid < 2 {
        return Err(DriftError::config("sweep grid needs at least two points"));
    }
    let detectors: Vec<String> = first.detectors.iter().map(|d| d.detector.clone()).collect();
    // alarms[s][d]
    let mut alarms: Vec<Vec<&[usize]>> = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let row = detectors
            .iter()
            .map(|name| {
                sc.detectors
                    .iter()
                    .find(|d| &d.detector == name)
                    .map(|d| d.alarm_times.as_slice())
                    .ok_or_else(|| {
                        DriftError::config(format!("scenario '{}' lacks detector '{name}'", sc.name))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        alarms.push(row);
    }

    let points = map_indices(exec, grid, |i| -> Result<SweepPoint> {
        let x = i as f64 / (grid - 1) as f64;
        let params = PenaltyParams {
            c1: -x,
            c2: -(1.0 - x),
            kappa,
        };
        let mut losses = vec![0.0; detectors.len()];
        for (sc, row) in scenarios.iter().zip(&alarms) {
            for (acc, al) in losses.iter_mut().zip(row) {
                *acc += total_loss(sc.t_start, al, &sc.p, &params)?;
            }
        }
        for l in &mut losses {
            *l /= scenarios.len() as f64;
        }
        let best_idx = losses
            .iter()
            .enumerate()
            .fold(0, |b, (k, &l)| if l > losses[b] { k } else { b });
        Ok(SweepPoint {
            c1: params.c1,
            c2: params.c2,
            best: detectors[best_idx].clone(),
            losses,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut regions: Vec<WinnerRegion> = Vec::new();
    for pt in &points {
        match regions.last_mut() {
            Some(r) if r.detector == pt.best => r.to = -pt.c1,
            _ => regions.push(WinnerRegion {
                detector: pt.best.clone(),
                from: -pt.c1,
                to: -pt.c1,
            }),
        }
    }
    Ok(SweepResult {
        detectors,
        points,
        regions,
    })
}
