//! Drift detection on univariate divergence series.
//!
//! Embedding batches are reduced to a divergence series against a baseline
//! ([`divergence`]), which is then monitored either by a sliding-window
//! Mann-Whitney test ([`mw_detector`]) or by a sequential change point model
//! with Monte Carlo calibrated thresholds ([`cpm`], [`calibration`]).
//! [`drift_sim`] generates synthetic scenarios and [`evaluation`] scores the
//! resulting alarm histories.

pub mod calibration;
pub mod cpm;
pub mod divergence;
pub mod drift_sim;
pub mod error;
pub mod evaluation;
pub mod exec;
mod fenwick;
pub mod io;
pub mod mw_detector;
pub mod outcome;
pub mod two_sample;

pub use calibration::{calibrate, CalibrationSpec, CriticalValueTable};
pub use cpm::{cpm_detect, CpmConfig, CpmDetector};
pub use error::{DriftError, Result};
pub use exec::ExecPolicy;
pub use mw_detector::{mw_detect, MwConfig, MwDetector};
pub use outcome::DetectionOutcome;
pub use two_sample::{Sample, Statistic};
