use serde::{Deserialize, Serialize};

use std::io::Read;

use crate::error::{invalid_input, Error, Result};

/// Ordinary least squares of `log y` on `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
    pub n_points: usize,
}

impl SlopeFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return invalid_input(format!("slope fit needs at least 2 points, got {}", points.len()));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return invalid_input(format!("slope fit needs positive finite coordinates, got ({x}, {y})"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid_input("slope fit needs at least two distinct abscissae");
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = logs
        .iter()
        .map(|&(lx, ly)| (ly - intercept - slope * lx).abs())
        .fold(0.0, f64::max);
    Ok(SlopeFit {
        slope,
        intercept,
        max_residual,
        n_points: points.len(),
    })
}

/// Fits column `y_col` against `x_col` of a headed CSV document.
pub fn fit_csv_columns(input: impl Read, x_col: &str, y_col: &str) -> Result<SlopeFit> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("csv header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("no column named {name:?}")))
    };
    let (xi, yi) = (column(x_col)?, column(y_col)?);
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        let cell = |i: usize| -> Result<f64> {
            record
                .get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: column {i} is not a number", line + 2)))
        };
        points.push((cell(xi)?, cell(yi)?));
    }
    slope_fit(&points)
}
