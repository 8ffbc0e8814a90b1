//! CSV and JSON input/output.
//!
//! Training data is CSV with header `x1,...,xd,y`, UTF-8, `.` decimal
//! separator, one observation per row. Covariates must already live in
//! the unit cube; out-of-range values are rejected with a hint to min-max
//! rescale. Experiment outputs are CSV tables plus a JSON summary whose
//! schema is documented in the README and pinned by a golden-file test.

use std::io::Write;
use std::path::Path;

use mondrian_rf::TrainingSet;
use serde::Serialize;

use crate::experiments::{BiasDecaySummary, CoverageSummary};
use crate::{HarnessError, Result};

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

/// Reads a training set, validating the `x1,...,xd,y` header.
pub fn read_training_csv(path: &Path) -> Result<TrainingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::Csv { path: path.display().to_string(), message: e.to_string() })?;

    let headers = reader
        .headers()
        .map_err(|e| HarnessError::Csv { path: path.display().to_string(), message: e.to_string() })?
        .clone();
    if headers.len() < 2 || &headers[headers.len() - 1] != "y" {
        return Err(HarnessError::Csv {
            path: path.display().to_string(),
            message: format!(
                "expected header 'x1,...,xd,y', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let dim = headers.len() - 1;
    for (j, name) in headers.iter().take(dim).enumerate() {
        let expected = format!("x{}", j + 1);
        if name != expected {
            return Err(HarnessError::Csv {
                path: path.display().to_string(),
                message: format!("column {} is '{name}', expected '{expected}'", j + 1),
            });
        }
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if record.len() != dim + 1 {
            return Err(HarnessError::Csv {
                path: path.display().to_string(),
                message: format!("row {}: expected {} fields, got {}", row + 2, dim + 1, record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| HarnessError::Csv {
                path: path.display().to_string(),
                message: format!("row {}: '{field}' is not a number", row + 2),
            })?;
            if col < dim {
                xs.push(value);
            } else {
                ys.push(value);
            }
        }
    }
    Ok(TrainingSet::new(xs, ys, dim)?)
}

/// Reads query points from a CSV with header `x1,...,xd`.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::Csv { path: path.display().to_string(), message: e.to_string() })?;
    let headers = reader
        .headers()
        .map_err(|e| HarnessError::Csv { path: path.display().to_string(), message: e.to_string() })?
        .clone();
    for (j, name) in headers.iter().enumerate() {
        let expected = format!("x{}", j + 1);
        if name != expected {
            return Err(HarnessError::Csv {
                path: path.display().to_string(),
                message: format!("column {} is '{name}', expected '{expected}'", j + 1),
            });
        }
    }
    let dim = headers.len();
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut point = Vec::with_capacity(dim);
        for field in record.iter() {
            point.push(field.parse::<f64>().map_err(|_| HarnessError::Csv {
                path: path.display().to_string(),
                message: format!("row {}: '{field}' is not a number", row + 2),
            })?);
        }
        points.push(point);
    }
    Ok(points)
}

/// Serializes a summary as pretty JSON; struct field order fixes the key
/// order, so output is byte-stable.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Invalid(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| io_err(path, e))?,
    ))
}

/// One row per query point: coordinates, then the coverage table.
pub fn write_coverage_csv(path: &Path, summary: &CoverageSummary) -> Result<()> {
    let mut out = open(path)?;
    let mut header: Vec<String> = (1..=summary.dim).map(|j| format!("x{j}")).collect();
    header.extend(
        ["mu", "coverage", "mean_ci_width", "mean_estimate", "rmse", "mean_lambda"]
            .map(String::from),
    );
    writeln!(out, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for point in &summary.points {
        let mut fields: Vec<String> = point.x.iter().map(|v| format!("{v}")).collect();
        for v in [
            point.mu,
            point.coverage,
            point.mean_ci_width,
            point.mean_estimate,
            point.rmse,
            point.mean_lambda,
        ] {
            fields.push(format!("{v}"));
        }
        writeln!(out, "{}", fields.join(",")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// One row per (query point, lambda): coordinates, lambda, bias.
pub fn write_bias_csv(path: &Path, summary: &BiasDecaySummary) -> Result<()> {
    let mut out = open(path)?;
    let mut header: Vec<String> = (1..=summary.dim).map(|j| format!("x{j}")).collect();
    header.extend(["lambda", "bias"].map(String::from));
    writeln!(out, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for query in &summary.queries {
        for point in &query.points {
            let mut fields: Vec<String> = query.x.iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", point.lambda));
            fields.push(format!("{}", point.bias));
            writeln!(out, "{}", fields.join(",")).map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_well_formed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        std::fs::write(&path, "x1,x2,y\n0.1,0.9,1.5\n0.4,0.2,-0.5\n").unwrap();
        let ts = read_training_csv(&path).unwrap();
        assert_eq!(ts.dim(), 2);
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.point(1), &[0.4, 0.2]);
        assert_eq!(ts.responses(), &[1.5, -0.5]);
    }

    #[test]
    fn rejects_bad_headers_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n0.1,1.0\n").unwrap();
        assert!(read_training_csv(&path).unwrap_err().to_string().contains("header"));

        std::fs::write(&path, "x1,y\n0.1,oops\n").unwrap();
        assert!(read_training_csv(&path).unwrap_err().to_string().contains("not a number"));

        std::fs::write(&path, "x1,y\n1.5,1.0\n").unwrap();
        let err = read_training_csv(&path).unwrap_err().to_string();
        assert!(err.contains("rescale"), "{err}");
    }
}
