//! Published loss tables: 15 scenarios each, KL and cosine, linear and step
//! drift, with t_s = 60 and a linear ramp ending at t_e = 80.
#![allow(dead_code)]

use driftwatch::drift_sim::{ContaminationSchedule, ScheduleKind};

pub const T_START: usize = 60;
pub const T_END: usize = 80;
pub const N_WINDOWS: usize = 120;

/// One printed row. The sequential detector never false-alarms.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub mw_delay: usize,
    pub seq_delay: usize,
    pub mw_false_alarms: usize,
    pub mw_loss: f64,
    pub seq_loss: f64,
    /// Printed θ for MW; only the step table has the column.
    pub mw_theta: Option<f64>,
}

const fn r(mw_delay: usize, seq_delay: usize, fa: usize, mw_loss: f64, seq_loss: f64) -> Row {
    Row { mw_delay, seq_delay, mw_false_alarms: fa, mw_loss, seq_loss, mw_theta: None }
}

const fn rt(mw_delay: usize, seq_delay: usize, fa: usize, mw_loss: f64, seq_loss: f64, theta: f64) -> Row {
    Row { mw_delay, seq_delay, mw_false_alarms: fa, mw_loss, seq_loss, mw_theta: Some(theta) }
}

pub struct Table {
    pub name: &'static str,
    pub kind: ScheduleKind,
    pub rows: [Row; 15],
    /// Caption: mean delay MW and Seq, mean θ MW, mean loss MW and Seq.
    pub caption: (f64, f64, f64, f64, f64),
}

pub const TABLES: [Table; 4] = [
    Table {
        name: "linear KL",
        kind: ScheduleKind::Linear,
        rows: [
            r(11, 20, 0, -0.286, -0.463),
            r(22, 17, 0, -0.478, -0.427),
            r(21, 20, 0, -0.471, -0.463),
            r(22, 20, 0, -0.478, -0.463),
            r(5, 16, 5, -2.582, -0.411),
            r(15, 16, 0, -0.391, -0.411),
            r(17, 18, 0, -0.427, -0.442),
            r(4, 18, 0, -0.054, -0.442),
            r(14, 15, 0, -0.369, -0.391),
            r(23, 23, 0, -0.483, -0.483),
            r(1, 19, 0, 0.0, -0.453),
            r(9, 23, 1, -0.719, -0.483),
            r(22, 26, 0, -0.478, -0.493),
            r(18, 20, 0, -0.442, -0.463),
            r(10, 23, 0, -0.253, -0.483),
        ],
        caption: (14.267, 19.6, 0.089, -0.527, -0.451),
    },
    Table {
        name: "linear cosine",
        kind: ScheduleKind::Linear,
        rows: [
            r(4, 16, 6, -3.054, -0.411),
            r(14, 16, 0, -0.369, -0.411),
            r(16, 19, 0, -0.411, -0.453),
            r(13, 17, 3, -1.844, -0.427),
            r(16, 14, 6, -3.411, -0.369),
            r(10, 15, 0, -0.253, -0.391),
            r(14, 15, 0, -0.369, -0.391),
            r(16, 13, 6, -3.411, -0.344),
            r(3, 14, 1, -0.530, -0.369),
            r(18, 19, 0, -0.442, -0.453),
            r(1, 18, 0, 0.0, -0.442),
            r(1, 24, 10, -5.000, -0.487),
            r(21, 29, 0, -0.471, -0.497),
            r(18, 20, 0, -0.442, -0.463),
            r(24, 22, 0, -0.487, -0.478),
        ],
        caption: (12.6, 18.067, 0.315, -1.366, -0.426),
    },
    Table {
        name: "step KL",
        kind: ScheduleKind::Step,
        rows: [
            rt(6, 7, 0, -0.412, -0.438, 0.0),
            rt(8, 7, 3, -1.956, -0.438, 0.75),
            rt(4, 7, 2, -1.323, -0.438, 0.667),
            rt(9, 6, 5, -2.969, -0.412, 0.833),
            rt(5, 6, 0, -0.375, -0.412, 0.0),
            rt(7, 7, 0, -0.438, -0.438, 0.0),
            rt(10, 7, 7, -3.978, -0.438, 0.875),
            rt(1, 7, 8, -4.000, -0.438, 0.889),
            rt(4, 7, 14, -7.323, -0.438, 0.933),
            rt(6, 7, 0, -0.412, -0.438, 0.0),
            rt(8, 7, 0, -0.456, -0.438, 0.0),
            rt(6, 7, 1, -0.912, -0.438, 0.5),
            rt(6, 8, 0, -0.412, -0.456, 0.0),
            rt(5, 7, 0, -0.375, -0.438, 0.0),
            rt(1, 7, 3, -1.500, -0.438, 0.75),
        ],
        caption: (5.733, 6.933, 0.413, -1.789, -0.435),
    },
    Table {
        name: "step cosine",
        kind: ScheduleKind::Step,
        rows: [
            rt(6, 6, 0, -0.412, -0.412, 0.0),
            rt(9, 7, 2, -1.469, -0.438, 0.667),
            rt(2, 7, 4, -2.146, -0.438, 0.8),
            rt(1, 7, 7, -3.5, -0.438, 0.875),
            rt(7, 7, 2, -1.438, -0.438, 0.667),
            rt(9, 7, 0, -0.469, -0.438, 0.0),
            rt(8, 7, 8, -4.456, -0.438, 0.889),
            rt(8, 7, 0, -0.456, -0.438, 0.0),
            rt(4, 7, 3, -1.823, -0.438, 0.75),
            rt(3, 7, 0, -0.25, -0.438, 0.0),
            rt(10, 7, 5, -2.978, -0.438, 0.833),
            rt(6, 7, 2, -1.412, -0.438, 0.667),
            rt(5, 8, 1, -0.875, -0.456, 0.5),
            rt(6, 7, 0, -0.412, -0.438, 0.0),
            rt(1, 7, 3, -1.5, -0.438, 0.75),
        ],
        caption: (5.667, 7.0, 0.493, -1.573, -0.437),
    },
];

pub fn schedule(kind: ScheduleKind) -> ContaminationSchedule {
    ContaminationSchedule::new(kind, N_WINDOWS, T_START, T_END).unwrap()
}

/// Alarm times realising `false_alarms` early alarms and a detection with
/// delay `delay`. Where the early alarms fall does not affect the loss.
pub fn alarms(false_alarms: usize, delay: usize) -> Vec<usize> {
    let mut a: Vec<usize> = (1..=false_alarms).map(|i| 2 * i).collect();
    a.push(T_START + delay - 1);
    a
}
