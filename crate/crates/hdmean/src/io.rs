//! Observation matrices and bit-exact CSV interchange.
//!
//! CSV conventions: comma separator, `\n` line ends (lone `\r` stripped on
//! read), `.` decimal point, no locale dependence, no quoting. Floats are
//! written with 17 significant digits, which round-trips every finite
//! binary64 value bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// An n×p sample: row t is the observation X_t at time t. Row order is the
/// temporal order; reordering rows changes the object's meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    values: Array2<f64>,
}

impl ObservationMatrix {
    /// Validates n ≥ 2, p ≥ 1 and that every entry is finite.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 {
            return Err(Error::dim(format!("observation matrix needs n >= 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::dim("observation matrix needs p >= 1 columns"));
        }
        if let Some(((t, j), v)) =
            values.indexed_iter().find(|(_, v)| !v.is_finite())
        {
            return Err(Error::dim(format!("non-finite entry {v} at row {t}, column {j}")));
        }
        Ok(ObservationMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Observation X_t as a row view (t is 0-based).
    pub fn row(&self, t: usize) -> ArrayView1<'_, f64> {
        self.values.row(t)
    }
}

/// Formats a finite f64 with 17 significant digits (lossless round-trip).
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Loads a numeric CSV as an observation matrix (rows are time order).
///
/// An optional single header row is auto-detected: if any cell of the first
/// row fails to parse as a float, the row is treated as a header.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<ObservationMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, usize> = cells
            .iter()
            .enumerate()
            .map(|(j, c)| c.trim().parse::<f64>().map_err(|_| j))
            .collect();
        match parsed {
            Ok(nums) => {
                if let Some(w) = width {
                    if nums.len() != w {
                        return Err(Error::parse(format!(
                            "ragged row {idx}: expected {w} cells, got {}",
                            nums.len()
                        )));
                    }
                } else {
                    width = Some(nums.len());
                }
                rows.push(nums);
            }
            Err(j) => {
                if idx == 0 && rows.is_empty() {
                    // Non-numeric first row: header, skipped.
                    continue;
                }
                return Err(Error::parse(format!(
                    "non-numeric cell at row {idx}, column {j}: {:?}",
                    cells[j]
                )));
            }
        }
    }
    let n = rows.len();
    let p = width.unwrap_or(0);
    if n < 2 {
        return Err(Error::dim(format!("need at least 2 data rows, got {n}")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((n, p), flat)
        .map_err(|e| Error::parse(format!("shape error: {e}")))?;
    ObservationMatrix::new(values)
}

/// Writes an observation matrix as CSV (no header), 17 significant digits.
pub fn save_matrix(x: &ObservationMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in x.values().rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", format_f64(*v));
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// One per-replicate experiment record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub replicate: u64,
    pub statistic: String,
    pub p_value: f64,
    pub reject: bool,
}

const RESULT_HEADER: &str = "scenario,n,p,m,replicate,statistic,p_value,reject";

/// Writes experiment records with a fixed column order and 17-significant-
/// digit floats; deterministic output for deterministic input.
pub fn save_results(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, results_to_csv(records))
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// The CSV text written by [`save_results`].
pub fn results_to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n,
            r.p,
            r.m,
            r.replicate,
            r.statistic,
            format_f64(r.p_value),
            u8::from(r.reject),
        );
    }
    out
}

/// Reads back a records CSV written by [`save_results`].
pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == RESULT_HEADER => {}
        _ => return Err(Error::parse(format!("expected header {RESULT_HEADER:?}"))),
    }
    let mut records = Vec::new();
    for (idx, raw_line) in lines {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(Error::parse(format!(
                "ragged row {idx}: expected 8 cells, got {}",
                cells.len()
            )));
        }
        let field = |j: usize, what: &str| -> Result<&str> {
            cells
                .get(j)
                .copied()
                .ok_or_else(|| Error::parse(format!("row {idx}: missing {what}")))
        };
        let parse_usize = |j: usize, what: &str| -> Result<usize> {
            field(j, what)?
                .parse()
                .map_err(|_| Error::parse(format!("row {idx}: bad {what}: {:?}", cells[j])))
        };
        records.push(ResultRecord {
            scenario: field(0, "scenario")?.to_string(),
            n: parse_usize(1, "n")?,
            p: parse_usize(2, "p")?,
            m: parse_usize(3, "m")?,
            replicate: cells[4]
                .parse()
                .map_err(|_| Error::parse(format!("row {idx}: bad replicate: {:?}", cells[4])))?,
            statistic: field(5, "statistic")?.to_string(),
            p_value: cells[6]
                .parse()
                .map_err(|_| Error::parse(format!("row {idx}: bad p_value: {:?}", cells[6])))?,
            reject: match cells[7] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(format!("row {idx}: bad reject flag: {other:?}")))
                }
            },
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_csv() {
        let f = write_temp("1,2\n3,4\n5,6");
        let x = load_matrix(f.path()).unwrap();
        assert_eq!(x.n(), 3);
        assert_eq!(x.p(), 2);
        assert_eq!(x.values(), &arr2(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]));
    }

    #[test]
    fn header_skip_then_too_few_rows() {
        // One data row after the header: n < 2 is a dimension error.
        let f = write_temp("a,b\n1,2");
        assert!(matches!(load_matrix(f.path()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn ragged_row_is_parse_error_with_row_index() {
        let f = write_temp("1,2\n3\n5,6");
        match load_matrix(f.path()) {
            Err(Error::Parse { context }) => assert!(context.contains("row 1"), "{context}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_parse_error_with_position() {
        let f = write_temp("1,2\n3,oops\n5,6");
        match load_matrix(f.path()) {
            Err(Error::Parse { context }) => {
                assert!(context.contains("row 1") && context.contains("column 1"), "{context}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_matrix("/nonexistent/path/x.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let bad = arr2(&[[1.0, f64::NAN], [0.0, 1.0]]);
        assert!(ObservationMatrix::new(bad).is_err());
    }

    #[test]
    fn save_results_empty_is_header_only() {
        let f = tempfile::NamedTempFile::new().unwrap();
        save_results(&[], f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, format!("{RESULT_HEADER}\n"));
    }

    #[test]
    fn save_results_single_record_is_two_lines() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let rec = ResultRecord {
            scenario: "s".into(),
            n: 10,
            p: 4,
            m: 1,
            replicate: 0,
            statistic: "t-new".into(),
            p_value: 0.25,
            reject: false,
        };
        save_results(std::slice::from_ref(&rec), f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.trim_end().lines().count(), 2);
        assert_eq!(load_results(f.path()).unwrap(), vec![rec]);
    }
}
