//! CSV files for smooth and power curves, with readers for round trips.

use std::path::Path;

use rankos::power::PowerCurvePoint;
use rankos::smooth::SmoothRow;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const SMOOTH_COLUMNS: [&str; 3] = ["x", "fitted_raw_scaled", "fitted_rank_scaled"];
pub const POWER_COLUMNS: [&str; 4] = ["c", "empirical_power", "limiting_power", "std_error"];

fn writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn write_smooth(path: &Path, rows: &[SmoothRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_smooth(path: &Path) -> CliResult<Vec<SmoothRow>> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        fitted_raw_scaled: f64,
        fitted_rank_scaled: f64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    check_header(path, &mut r, &SMOOTH_COLUMNS)?;
    r.deserialize::<Row>()
        .map(|row| {
            row.map(|r| SmoothRow {
                x: r.x,
                fitted_raw_scaled: r.fitted_raw_scaled,
                fitted_rank_scaled: r.fitted_rank_scaled,
            })
            .map_err(|e| csv_err(path, e))
        })
        .collect()
}

/// `limiting_power` is left empty for methods without a known limit.
pub fn write_power(path: &Path, points: &[PowerCurvePoint]) -> CliResult<()> {
    let mut w = writer(path)?;
    for p in points {
        w.serialize(p).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_power(path: &Path) -> CliResult<Vec<PowerCurvePoint>> {
    #[derive(Deserialize)]
    struct Row {
        c: f64,
        empirical_power: f64,
        limiting_power: Option<f64>,
        std_error: f64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    check_header(path, &mut r, &POWER_COLUMNS)?;
    r.deserialize::<Row>()
        .map(|row| {
            row.map(|r| PowerCurvePoint {
                c: r.c,
                empirical_power: r.empirical_power,
                limiting_power: r.limiting_power,
                std_error: r.std_error,
            })
            .map_err(|e| csv_err(path, e))
        })
        .collect()
}

fn check_header<R: std::io::Read>(path: &Path, r: &mut csv::Reader<R>, expected: &[&str]) -> CliResult<()> {
    let found = r.headers().map_err(|e| csv_err(path, e))?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(CliError::Input(format!("{}: expected columns {expected:?}", path.display())));
    }
    Ok(())
}
