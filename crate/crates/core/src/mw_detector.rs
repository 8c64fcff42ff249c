//! Sliding-window Mann-Whitney drift detector.
//!
//! From `t = window` on, the trailing window is split into two halves and
//! compared with a Mann-Whitney test. Rejections (`p < alpha`) increment a
//! counter, any non-rejection resets it, and an alarm fires when the counter
//! reaches `consecutive_required`. No correction is made for the repeated
//! testing, so under the null the detector alarms far more often than alpha.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::outcome::DetectionOutcome;
use crate::two_sample::{mann_whitney_with, MwPValue, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwConfig {
    pub alpha: f64,
    /// Window size; each half holds `window / 2` points.
    pub window: usize,
    /// Consecutive rejections needed to raise an alarm.
    pub consecutive_required: usize,
}

impl Default for MwConfig {
    fn default() -> Self {
        MwConfig {
            alpha: 0.05,
            window: 40,
            consecutive_required: 1,
        }
    }
}

impl MwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DriftError::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.window < 4 || !self.window.is_multiple_of(2) {
            return Err(DriftError::config(format!(
                "window must be even and at least 4, got {}",
                self.window
            )));
        }
        if self.consecutive_required == 0 {
            return Err(DriftError::config("consecutive_required must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwStep {
    pub t: usize,
    /// `None` before the window is full.
    pub p_value: Option<f64>,
    pub rejected: bool,
    pub count: usize,
    pub alarmed: bool,
}

/// Streaming state machine for the sliding-window test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MwDetector {
    config: MwConfig,
    window: VecDeque<f64>,
    t: usize,
    count: usize,
    alarms: Vec<usize>,
}

impl MwDetector {
    pub fn new(config: MwConfig) -> Result<Self> {
        config.validate()?;
        Ok(MwDetector {
            config,
            window: VecDeque::with_capacity(config.window),
            t: 0,
            count: 0,
            alarms: Vec::new(),
        })
    }

    pub fn config(&self) -> &MwConfig {
        &self.config
    }

    /// Feeds `x_t`. After an alarm the counter resets and scanning goes on
    /// with the window intact.
    pub fn step(&mut self, x: f64) -> Result<MwStep> {
        self.t += 1;
        if !x.is_finite() {
            return Err(DriftError::NonFinite {
                index: self.t,
                value: x,
            });
        }
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(x);
        if self.window.len() < self.config.window {
            return Ok(MwStep {
                t: self.t,
                p_value: None,
                rejected: false,
                count: 0,
                alarmed: false,
            });
        }

        let half = self.config.window / 2;
        let (front, back): (Vec<f64>, Vec<f64>) = {
            let all: Vec<f64> = self.window.iter().copied().collect();
            (all[..half].to_vec(), all[half..].to_vec())
        };
        let d1 = Sample::new(front)?;
        let d2 = Sample::new(back)?;
        let p = mann_whitney_with(&d1, &d2, MwPValue::Auto)?
            .p_value
            .expect("Mann-Whitney reports a p-value");

        let rejected = p < self.config.alpha;
        let mut alarmed = false;
        if rejected {
            self.count += 1;
            if self.count == self.config.consecutive_required {
                alarmed = true;
                self.alarms.push(self.t);
                self.count = 0;
            }
        } else {
            self.count = 0;
        }
        Ok(MwStep {
            t: self.t,
            p_value: Some(p),
            rejected,
            count: self.count,
            alarmed,
        })
    }

    pub fn alarm_times(&self) -> &[usize] {
        &self.alarms
    }

    pub fn outcome(&self) -> DetectionOutcome {
        DetectionOutcome::from_alarms(self.alarms.clone())
    }
}

fn check_len(series: &[f64], cfg: &MwConfig) -> Result<()> {
    cfg.validate()?;
    if series.len() < cfg.window {
        return Err(DriftError::SeriesTooShort {
            len: series.len(),
            required: cfg.window,
        });
    }
    Ok(())
}

/// Single-shot detection: stops at the first alarm.
pub fn mw_detect(series: &[f64], cfg: &MwConfig) -> Result<DetectionOutcome> {
    check_len(series, cfg)?;
    let mut det = MwDetector::new(*cfg)?;
    for &x in series {
        if det.step(x)?.alarmed {
            break;
        }
    }
    Ok(det.outcome())
}

/// Multi-alarm detection: scans the whole series and records every alarm.
pub fn mw_detect_multi(series: &[f64], cfg: &MwConfig) -> Result<DetectionOutcome> {
    check_len(series, cfg)?;
    let mut det = MwDetector::new(*cfg)?;
    for &x in series {
        det.step(x)?;
    }
    Ok(det.outcome())
}
