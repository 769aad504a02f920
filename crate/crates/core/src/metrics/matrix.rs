use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

/// Dense subjects × columns table of observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl DataMatrix {
    /// Builds a matrix from rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        let headers = (1..=k).map(|j| format!("c{j}")).collect();
        Self::with_headers(headers, rows)
    }

    pub fn with_headers(headers: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = headers.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(MetricsError::InvalidInput(format!(
                "row {} has {} values, expected {k}",
                i + 1,
                r.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MetricsError::InvalidInput("non-finite value".into()));
        }
        Ok(Self { headers, rows })
    }

    /// Column-major construction, one vector per condition.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(MetricsError::InvalidInput("columns differ in length".into()));
        }
        Self::from_rows((0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }

    /// Reads CSV with a header row and one subject per row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let csv_err = |e: csv::Error| MetricsError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        };
        let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(MetricsError::Csv {
                line: 1,
                message: "missing header row".into(),
            });
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| MetricsError::Csv {
                        line,
                        message: format!("{f:?} is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::with_headers(headers, rows)
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.headers.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}
