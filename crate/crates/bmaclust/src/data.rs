//! Observation matrices and CSV ingestion.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An N x d matrix of observations, one row per observation. All entries are
/// finite; N >= 1 and d >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "data must have at least one row and one column, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for (i, row) in values.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry {v} at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(DataMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("no data rows".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows in data".into()));
        }
        let m = DMatrix::from_row_iterator(rows.len(), d, rows.iter().flatten().cloned());
        DataMatrix::new(m)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// Observations as owned column vectors (handy for per-point loops).
    pub fn points(&self) -> Vec<DVector<f64>> {
        (0..self.n_rows()).map(|i| self.row(i)).collect()
    }

    /// Sample mean vector.
    pub fn mean(&self) -> DVector<f64> {
        let n = self.n_rows() as f64;
        let mut m = DVector::zeros(self.dim());
        for row in self.values.row_iter() {
            m += row.transpose();
        }
        m / n
    }

    /// Sample covariance with denominator `n - 1`.
    pub fn sample_covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.n_rows();
        if n < 2 {
            return Err(Error::InvalidInput(
                "sample covariance needs at least two rows".into(),
            ));
        }
        let mu = self.mean();
        let d = self.dim();
        let mut s = DMatrix::zeros(d, d);
        for row in self.values.row_iter() {
            let c = row.transpose() - &mu;
            s += &c * c.transpose();
        }
        Ok(s / (n as f64 - 1.0))
    }

    /// Number of pairwise-distinct rows.
    pub fn distinct_rows(&self) -> usize {
        let mut seen: Vec<Vec<u64>> = Vec::with_capacity(self.n_rows());
        for row in self.values.row_iter() {
            let bits: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            if !seen.contains(&bits) {
                seen.push(bits);
            }
        }
        seen.len()
    }

    /// SHA-256 over the dimensions and the little-endian bytes of the
    /// entries in row-major order; identifies the dataset in manifests and
    /// ensemble files.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for row in self.values.row_iter() {
            for v in row.iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex_string(&h.finalize())
    }

    /// CSV text with the given column names, values formatted as shortest
    /// round-trip decimals. `comment` lines, if any, are prefixed with `#`.
    pub fn to_csv(&self, columns: &[String], comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", columns.join(","));
        for row in self.values.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Result of reading a CSV: the numeric matrix, the kept column names, and
/// any excluded label columns (name -> per-row values).
#[derive(Debug)]
pub struct CsvData {
    pub data: DataMatrix,
    pub columns: Vec<String>,
    pub dropped: Vec<(String, Vec<String>)>,
}

/// Read a headered CSV into a numeric matrix. Lines starting with `#` are
/// comments. `drop` columns (by header name or 0-based index) are excluded
/// from the matrix but their values are kept as strings.
pub fn read_csv(path: &Path, drop: &[String]) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv { row: 0, msg: e.to_string() })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let mut drop_idx = Vec::new();
    for key in drop {
        let idx = if let Ok(i) = key.parse::<usize>() {
            if i >= headers.len() {
                return Err(Error::InvalidInput(format!(
                    "drop column index {i} out of range (have {} columns)",
                    headers.len()
                )));
            }
            i
        } else {
            headers
                .iter()
                .position(|h| h == key)
                .ok_or_else(|| Error::InvalidInput(format!("no column named '{key}'")))?
        };
        if !drop_idx.contains(&idx) {
            drop_idx.push(idx);
        }
    }

    let kept: Vec<usize> = (0..headers.len()).filter(|i| !drop_idx.contains(i)).collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("all columns were dropped".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped_vals: Vec<Vec<String>> = vec![Vec::new(); drop_idx.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { row: r + 1, msg: e.to_string() })?;
        let mut row = Vec::with_capacity(kept.len());
        for &c in &kept {
            let cell = rec.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row: r + 1,
                msg: format!("column {} ('{}') is not numeric: '{cell}'", c, headers[c]),
            })?;
            row.push(v);
        }
        for (k, &c) in drop_idx.iter().enumerate() {
            dropped_vals[k].push(rec.get(c).unwrap_or("").trim().to_string());
        }
        rows.push(row);
    }

    let data = DataMatrix::from_rows(&rows)?;
    Ok(CsvData {
        data,
        columns: kept.iter().map(|&i| headers[i].clone()).collect(),
        dropped: drop_idx
            .iter()
            .enumerate()
            .map(|(k, &i)| (headers[i].clone(), std::mem::take(&mut dropped_vals[k])))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(DataMatrix::from_rows(&[]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0], vec![2.0, 3.0]]).is_err());
    }

    #[test]
    fn fingerprint_changes_with_content() {
        let a = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = DataMatrix::from_rows(&[vec![1.0, 2.5]]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.fingerprint());
    }

    #[test]
    fn csv_roundtrip_with_label_column() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# a comment").unwrap();
        writeln!(f, "x,y,label").unwrap();
        writeln!(f, "1.0,2.0,a").unwrap();
        writeln!(f, "3.5,-4.0,b").unwrap();
        f.flush().unwrap();
        let got = read_csv(f.path(), &["label".to_string()]).unwrap();
        assert_eq!(got.data.n_rows(), 2);
        assert_eq!(got.data.dim(), 2);
        assert_eq!(got.columns, vec!["x", "y"]);
        assert_eq!(got.dropped[0].1, vec!["a", "b"]);
        assert_eq!(got.data.matrix()[(1, 1)], -4.0);
    }

    #[test]
    fn csv_reports_offending_row() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x,y").unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        writeln!(f, "1.0,oops").unwrap();
        f.flush().unwrap();
        let err = read_csv(f.path(), &[]).unwrap_err();
        match err {
            Error::Csv { row, msg } => {
                assert_eq!(row, 2);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn distinct_row_count() {
        let m = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(m.distinct_rows(), 2);
    }
}
