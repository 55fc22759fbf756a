use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matops::Matrix;

/// Formats a path as CSV, one row per time step, with 17 significant
/// digits so that values round-trip exactly.
pub fn matrix_to_csv(x: &Matrix, header: bool) -> String {
    let d = x.cols();
    let mut out = String::with_capacity(x.rows() * d * 25);
    if header {
        let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for row in x.row_iter() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Parses numeric CSV; a first line that does not parse as numbers is
/// taken as a header.
pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::invalid(format!("csv: {e}")))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(_) => return Err(Error::invalid(format!("csv: non-numeric value on record {}", line + 1))),
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::invalid(format!(
                    "csv: record {} has {} fields, expected {c}",
                    line + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::invalid("csv: no data rows"))?;
    if cols == 0 {
        return Err(Error::invalid("csv: empty rows"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("csv: non-finite value"));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    matrix_from_csv(&text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let x = Matrix::from_rows(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 123456789.123456789]]).unwrap();
        for header in [false, true] {
            let back = matrix_from_csv(&matrix_to_csv(&x, header)).unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("1,2\n3,x\n").is_err());
        assert!(matrix_from_csv("a,b\n").is_err());
        assert!(matrix_from_csv("1,nan\n").is_err());
        let m = matrix_from_csv("a,b\n1,2\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 2));
    }
}
