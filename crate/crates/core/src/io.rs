//! File formats shared by the command-line tools.
//!
//! * feature CSV: header row, then one row per image vector with the batch
//!   index in the first column;
//! * baseline CSV: header row and a single row holding the mean vector;
//! * divergence CSV: columns `t,value` with `t` running from 1.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::divergence::{BaselineProfile, DivergenceSeries, FeatureBatch};
use crate::drift_sim::{ContaminationSchedule, ScheduleKind};
use crate::error::{DriftError, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| DriftError::io(path, e))
}

fn parse_f64(field: &str, path: &Path, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| DriftError::format(path, format!("line {line}: '{field}' is not a number")))
}

fn records<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

/// Batches sorted by batch index; rows sharing an index form one batch.
pub fn read_features<R: Read>(rdr: R, path: &Path) -> Result<Vec<FeatureBatch>> {
    let mut groups: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for rec in records(rdr).records() {
        let rec = rec.map_err(|e| DriftError::format(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut fields = rec.iter();
        let idx = fields.next().unwrap_or("");
        let batch_index = idx.trim().parse::<usize>().map_err(|_| {
            DriftError::format(path, format!("line {line}: batch index '{idx}' is not an integer"))
        })?;
        let v = fields
            .map(|f| parse_f64(f, path, line))
            .collect::<Result<Vec<_>>>()?;
        groups.entry(batch_index).or_default().push(v);
    }
    Ok(groups
        .into_iter()
        .map(|(batch_index, vectors)| FeatureBatch {
            batch_index,
            vectors,
        })
        .collect())
}

pub fn read_features_file(path: &Path) -> Result<Vec<FeatureBatch>> {
    read_features(open(path)?, path)
}

pub fn read_baseline<R: Read>(rdr: R, path: &Path) -> Result<BaselineProfile> {
    let mut rows = records(rdr).into_records();
    let rec = rows
        .next()
        .ok_or_else(|| DriftError::format(path, "baseline file has no data row"))?
        .map_err(|e| DriftError::format(path, e))?;
    if rows.next().is_some() {
        return Err(DriftError::format(path, "baseline file must hold exactly one row"));
    }
    let v = rec
        .iter()
        .map(|f| parse_f64(f, path, 2))
        .collect::<Result<Vec<_>>>()?;
    BaselineProfile::new(v)
}

pub fn read_baseline_file(path: &Path) -> Result<BaselineProfile> {
    read_baseline(open(path)?, path)
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    t: usize,
    value: f64,
}

pub fn read_series<R: Read>(rdr: R, path: &Path) -> Result<DivergenceSeries> {
    let mut values = Vec::new();
    for row in records(rdr).deserialize::<SeriesRow>() {
        let row = row.map_err(|e| DriftError::format(path, e))?;
        if row.t != values.len() + 1 {
            return Err(DriftError::format(
                path,
                format!("expected t = {}, found {}", values.len() + 1, row.t),
            ));
        }
        values.push(row.value);
    }
    DivergenceSeries::new(values, None)
}

pub fn read_series_file(path: &Path) -> Result<DivergenceSeries> {
    read_series(open(path)?, path)
}

pub fn write_series<W: Write>(w: W, values: &[f64]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (i, &value) in values.iter().enumerate() {
        wtr.serialize(SeriesRow { t: i + 1, value })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Ground truth of a simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub t_start: usize,
    pub t_end: usize,
    pub n_windows: usize,
    pub kind: ScheduleKind,
    /// Contamination at windows `t_start..=n_windows`.
    pub p: Vec<f64>,
    /// The last pre-drift observation, `t_start - 1`, which is the
    /// changepoint under the "last observation of the old regime" convention.
    pub changepoint: usize,
}

impl From<&ContaminationSchedule> for GroundTruth {
    fn from(s: &ContaminationSchedule) -> Self {
        GroundTruth {
            t_start: s.t_start,
            t_end: s.t_end,
            n_windows: s.n_windows,
            kind: s.kind,
            p: s.p.clone(),
            changepoint: s.t_start - 1,
        }
    }
}

impl GroundTruth {
    pub fn schedule(&self) -> Result<ContaminationSchedule> {
        ContaminationSchedule::custom(self.n_windows, self.t_start, self.t_end, self.p.clone())
            .map(|mut s| {
                s.kind = self.kind;
                s
            })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(std::io::BufReader::new(open(path)?))
        .map_err(|e| DriftError::format(path, e))
}
