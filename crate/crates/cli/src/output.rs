//! CSV rows and JSONL density profiles.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use heis_area::group::Point;
use heis_area::mc::MeasureEstimate;
use heis_area::measure::DensityProfile;
use serde::Serialize;

use crate::CliError;

/// One estimate. Exact quantities carry `std_error = 0` and `samples = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub suite: String,
    pub subject: String,
    pub point: String,
    pub distance: String,
    pub quantity: String,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Row {
    pub fn estimate(suite: &str, subject: &str, point: &str, distance: &str, quantity: &str, e: &MeasureEstimate) -> Self {
        Self {
            suite: suite.into(),
            subject: subject.into(),
            point: point.into(),
            distance: distance.into(),
            quantity: quantity.into(),
            value: e.value,
            std_error: e.std_error,
            samples: e.n_samples,
            seed: e.seed,
        }
    }

    pub fn exact(suite: &str, subject: &str, point: &str, distance: &str, quantity: &str, value: f64, seed: u64) -> Self {
        Self::estimate(suite, subject, point, distance, quantity, &MeasureEstimate { value, std_error: 0.0, n_samples: 0, seed })
    }
}

/// Space-separated coordinates.
pub fn fmt_point(p: &Point) -> String {
    fmt_coords(p.coords())
}

pub fn fmt_coords(c: &[f64]) -> String {
    c.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileRecord {
    pub surface: String,
    pub point: Vec<f64>,
    pub kind: &'static str,
    pub alpha: f64,
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples: Vec<usize>,
    pub seeds: Vec<u64>,
    pub centers: Vec<Vec<f64>>,
    pub limit: f64,
    pub converged: bool,
}

impl ProfileRecord {
    pub fn new(surface: &str, point: &Point, kind: &'static str, p: &DensityProfile) -> Self {
        Self {
            surface: surface.into(),
            point: point.to_vec(),
            kind,
            alpha: p.alpha,
            scales: p.scales.clone(),
            values: p.values.iter().map(|e| e.value).collect(),
            std_errors: p.values.iter().map(|e| e.std_error).collect(),
            samples: p.values.iter().map(|e| e.n_samples).collect(),
            seeds: p.values.iter().map(|e| e.seed).collect(),
            centers: p.centers.iter().map(|c| c.to_vec()).collect(),
            limit: p.limit.value,
            converged: p.converged,
        }
    }
}

pub fn write_jsonl(path: &Path, records: &[ProfileRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
