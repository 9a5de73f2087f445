//! Input data: a CSV with a header row, `d` covariate columns and then `y`.

use std::path::Path;

use dncboot::{Points, Sample};

use crate::error::{CliError, Result};

pub fn read_sample(path: &Path) -> Result<Sample> {
    let file = std::fs::File::open(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let data_err = |row: u64, message: String| CliError::Data {
        path: path.to_path_buf(),
        row,
        message,
    };

    let cols = reader.headers()?.len();
    if cols < 2 {
        return Err(data_err(1, format!("need at least one covariate and y, header has {cols} column(s)")));
    }
    let dim = cols - 1;
    let mut coords = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols {
            return Err(data_err(line, format!("expected {cols} fields, found {}", record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| data_err(line, format!("column {}: `{field}` is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(data_err(line, format!("column {}: value must be finite", j + 1)));
            }
            if j < dim {
                coords.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(data_err(2, "no data rows".to_string()));
    }
    Ok(Sample::new(Points::new(dim, coords)?, ys)?)
}
