//! CSV ingestion for `y` with an optional ordering column `x`.

use std::path::Path;

use rankos::basis::DesignedSample;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A response vector in design order, plus where it came from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sample: DesignedSample,
    pub input: InputInfo,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    /// Whether an `x` column was read.
    pub has_x: bool,
    /// How rows were placed on the design grid.
    pub projection: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let (x, y) = parse_columns(&bytes)?;
    let (y, x_range) = match x {
        None => (y, None),
        Some(x) => {
            let mut rows: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(CliError::Input(format!("duplicate x value {}", w[0].0)));
            }
            let range = [rows[0].0, rows[rows.len() - 1].0];
            (rows.into_iter().map(|r| r.1).collect(), Some(range))
        }
    };
    let sample = DesignedSample::new(y)?;
    Ok(Dataset {
        sample,
        input: InputInfo {
            path: path.display().to_string(),
            sha256,
            has_x: x_range.is_some(),
            projection: if x_range.is_some() { "sorted_by_x_then_midpoint_grid" } else { "row_order_midpoint_grid" },
            x_range,
        },
    })
}

/// Column `y` (and `x` if present) by header name. A single unnamed column
/// is taken as `y`; two columns without those names as `x, y`.
fn parse_columns(bytes: &[u8]) -> CliResult<(Option<Vec<f64>>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| CliError::Input(format!("CSV header: {e}")))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (xi, yi) = match (find("x"), find("y")) {
        (x, Some(y)) => (x, y),
        (None, None) if headers.len() == 1 => (None, 0),
        (None, None) if headers.len() == 2 => (Some(0), 1),
        _ => return Err(CliError::Input("CSV needs a y column (and optionally x)".into())),
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("CSV row {}: {e}", row + 2)))?;
        let field = |i: usize, name: &str| -> CliResult<f64> {
            let s = record.get(i).unwrap_or("");
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Input(format!("CSV row {}: {name} = {s:?} is not a finite number", row + 2))),
            }
        };
        ys.push(field(yi, "y")?);
        if let Some(xi) = xi {
            xs.push(field(xi, "x")?);
        }
    }
    if ys.is_empty() {
        return Err(CliError::Input("CSV has no data rows".into()));
    }
    Ok((xi.map(|_| xs), ys))
}
