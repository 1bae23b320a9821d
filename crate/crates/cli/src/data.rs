//! CSV ingestion.

use std::path::Path;

use selinf::linalg::{Matrix, Vector};

use crate::{CliResult, Failure};

/// Response and predictors read from a CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub response: String,
    pub predictors: Vec<String>,
    pub x: Matrix,
    pub y: Vector,
}

pub fn read_csv(path: &Path, response: &str) -> CliResult<Table> {
    let file = std::fs::File::open(path).map_err(|e| Failure::io(path, e))?;
    parse_csv(file, response).map_err(|f| match f {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Every cell must parse as a finite number.
pub fn parse_csv(reader: impl std::io::Read, response: &str) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Failure::usage(format!("malformed CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let resp_col = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Failure::usage(format!("response column '{response}' not found")))?;
    if header.len() < 2 {
        return Err(Failure::usage("need at least one predictor column"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Failure::usage(format!("malformed CSV at line {line}: {e}")))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Failure::usage(format!(
                    "line {line}, column '{}': '{cell}' is not a finite number",
                    header[j]
                ))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::usage("CSV has no data rows"));
    }

    let n = rows.len();
    let pred_cols: Vec<usize> = (0..header.len()).filter(|&j| j != resp_col).collect();
    let x = Matrix::from_fn(n, pred_cols.len(), |i, k| rows[i][pred_cols[k]]);
    let y = Vector::from_fn(n, |i, _| rows[i][resp_col]);
    Ok(Table {
        response: response.to_string(),
        predictors: pred_cols.iter().map(|&j| header[j].clone()).collect(),
        x,
        y,
    })
}

/// Centers `y` and the columns of `x`, then scales columns to unit norm.
pub fn standardize(x: &Matrix, y: &Vector) -> CliResult<(Matrix, Vector)> {
    let mut xs = x.clone();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(Failure::usage(format!("predictor column {j} is constant")));
        }
        col /= norm;
    }
    let ys = y.add_scalar(-y.mean());
    Ok((xs, ys))
}
