//! CSV ingestion: header row required, numeric columns, `.` as decimal point.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    columns: HashMap<String, Vec<f64>>,
    pub rows: usize,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: std::io::Read>(reader: R, label: &str) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(label, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(CliError::Input(format!("{label}: missing header row")));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(label, e))?;
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    CliError::Input(format!(
                        "{label}: row {}, column '{}': '{cell}' is not a number",
                        i + 2,
                        headers[j]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Input(format!("{label}: row {}, column '{}' is not finite", i + 2, headers[j])));
                }
                cols[j].push(v);
            }
            rows += 1;
        }
        let columns = headers.iter().cloned().zip(cols).collect();
        Ok(Self { headers, columns, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<&[f64]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| {
            CliError::Input(format!("column '{name}' not found (available: {})", self.headers.join(", ")))
        })
    }
}

fn csv_error(label: &str, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::Io {
            path: label.to_owned(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => CliError::Input(format!("{label}: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_names_missing_columns() {
        let t = Table::from_reader("x, y\n1.5,2\n-3e-1, 4\n".as_bytes(), "mem").unwrap();
        assert_eq!(t.rows, 2);
        assert_eq!(t.column("x").unwrap(), &[1.5, -0.3]);
        let err = t.column("z").unwrap_err().to_string();
        assert!(err.contains("'z'"), "{err}");
    }

    #[test]
    fn rejects_locale_decimals_and_ragged_rows() {
        let e = Table::from_reader("x\n1,5\n".as_bytes(), "mem").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = Table::from_reader("x\n\"1,5\"\n".as_bytes(), "mem").unwrap_err();
        assert!(e.to_string().contains("not a number"));
        assert!(Table::from_reader("x,y\n1\n".as_bytes(), "mem").is_err());
    }
}
