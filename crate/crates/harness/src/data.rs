//! Loader for regression tables.

use std::path::Path;

use ngn_core::problems::RegressionSource;

use crate::error::{HarnessError, Result};

/// Reads a numeric CSV whose last column is the target. A first row that
/// does not parse as numbers is treated as a header.
pub fn load_regression_csv(path: &Path) -> Result<RegressionSource> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::csv(path, e))?;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| HarnessError::csv(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = row.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(ngn_core::Error::MalformedData(format!("{}: non-numeric row {}", path.display(), line + 1)).into())
            }
        };
        if values.len() < 2 {
            return Err(ngn_core::Error::MalformedData(format!("{}: row {} needs a feature and a target", path.display(), line + 1)).into());
        }
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(ngn_core::Error::MalformedData(format!("{}: ragged row {}", path.display(), line + 1)).into());
        }
        let (x, y) = values.split_at(values.len() - 1);
        features.push(x.to_vec());
        targets.push(y[0]);
    }
    if targets.is_empty() {
        return Err(ngn_core::Error::MalformedData(format!("{}: no data rows", path.display())).into());
    }
    Ok(RegressionSource::Table { features, targets })
}
