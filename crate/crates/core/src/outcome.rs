use serde::{Deserialize, Serialize};

/// What a detector reports for one series.
///
/// `detection_time` is the first alarm (1-based index into the series),
/// `None` meaning the detector never fired. `estimated_changepoint` is the
/// change point model's split estimate, the last index before the change.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub detection_time: Option<usize>,
    #[serde(default)]
    pub estimated_changepoint: Option<usize>,
    #[serde(default)]
    pub alarm_times: Vec<usize>,
}

impl DetectionOutcome {
    pub fn never() -> Self {
        DetectionOutcome::default()
    }

    /// Builds an outcome from an increasing list of alarms.
    pub fn from_alarms(alarm_times: Vec<usize>) -> Self {
        debug_assert!(alarm_times.windows(2).all(|w| w[0] < w[1]));
        DetectionOutcome {
            detection_time: alarm_times.first().copied(),
            estimated_changepoint: None,
            alarm_times,
        }
    }

    pub fn detected(&self) -> bool {
        self.detection_time.is_some()
    }
}
