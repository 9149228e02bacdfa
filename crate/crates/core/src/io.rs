//! Plain-text file formats.
//!
//! Everything is CSV with an optional leading comment line of the form
//! `# key=value key=value` stating the expected dimensions. Readers infer
//! dimensions from the data and cross-check them against the header when one
//! is present. Floats are written in shortest-round-trip form, so a
//! write/read cycle reproduces values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::system::{ChargeVector, DetectorCounts, SystemMatrix};
use crate::{Error, Result};

/// Shortest representation that parses back to the same value.
pub fn fmt_float<S: Scalar>(v: S) -> String {
    format!("{v:?}")
}

fn parse_float<S: Scalar>(token: &str, line: usize) -> Result<S> {
    let v: f64 = token.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got {token:?}"),
    })?;
    S::from_f64(v).ok_or_else(|| Error::Parse {
        line,
        message: format!("value {v} not representable in the target scalar type"),
    })
}

/// Header `key=value` pairs collected from `#` comment lines.
type HeaderPairs = Vec<(String, String)>;
/// Data lines paired with their 1-based line numbers.
type DataLines<'a> = Vec<(usize, &'a str)>;

/// Split file content into header pairs and data lines.
fn split_lines(content: &str) -> (HeaderPairs, DataLines<'_>) {
    let mut header = Vec::new();
    let mut data = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some((k, v)) = token.split_once('=') {
                    header.push((k.to_string(), v.to_string()));
                }
            }
        } else {
            data.push((idx + 1, raw));
        }
    }
    (header, data)
}

fn check_header(header: &[(String, String)], key: &str, actual: usize) -> Result<()> {
    for (k, v) in header {
        if k == key {
            let declared: usize = v.parse().map_err(|_| Error::Parse {
                line: 1,
                message: format!("header {key}={v:?} is not a count"),
            })?;
            if declared != actual {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header declares {key}={declared} but data has {actual}"),
                });
            }
        }
    }
    Ok(())
}

/// Write a system matrix: `# pixels=B detectors=D`, one pixel row per line.
pub fn write_system_matrix<S: Scalar>(path: &Path, m: &SystemMatrix<S>) -> Result<()> {
    let mut out = format!("# pixels={} detectors={}\n", m.n_pixels(), m.n_detectors());
    for b in 0..m.n_pixels() {
        let row: Vec<String> = m.row(b).iter().map(|&v| fmt_float(v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a system matrix written by [`write_system_matrix`] (or by hand).
/// Validates row-stochasticity on construction.
pub fn read_system_matrix<S: Scalar>(path: &Path) -> Result<SystemMatrix<S>> {
    let content = fs::read_to_string(path)?;
    let (header, data) = split_lines(&content);
    if data.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "matrix file has no data rows".into(),
        });
    }
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(data.len());
    let width = data[0].1.split(',').count();
    for (line, text) in data {
        let row: Vec<S> = text
            .split(',')
            .map(|tok| parse_float(tok, line))
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, got {}", row.len()),
            });
        }
        rows.push(row);
    }
    check_header(&header, "pixels", rows.len())?;
    check_header(&header, "detectors", width)?;
    SystemMatrix::new(Matrix::from_rows(&rows))
}

/// Write a charge profile: `# pixels=B`, one value per line.
pub fn write_charge_vector<S: Scalar>(path: &Path, lambda: &ChargeVector<S>) -> Result<()> {
    let mut out = format!("# pixels={}\n", lambda.len());
    for &v in lambda.as_slice() {
        let _ = writeln!(out, "{}", fmt_float(v));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_charge_vector<S: Scalar>(path: &Path) -> Result<ChargeVector<S>> {
    let content = fs::read_to_string(path)?;
    let (header, data) = split_lines(&content);
    let mut values = Vec::with_capacity(data.len());
    for (line, text) in data {
        values.push(parse_float(text, line)?);
    }
    check_header(&header, "pixels", values.len())?;
    ChargeVector::new(values)
}

/// Write detector counts: `# detectors=D`, one integer per line.
pub fn write_counts(path: &Path, counts: &DetectorCounts) -> Result<()> {
    let mut out = format!("# detectors={}\n", counts.len());
    for &n in counts.as_slice() {
        let _ = writeln!(out, "{n}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_counts(path: &Path) -> Result<DetectorCounts> {
    let content = fs::read_to_string(path)?;
    let (header, data) = split_lines(&content);
    let mut values = Vec::with_capacity(data.len());
    for (line, text) in data {
        let n: u64 = text.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected a nonnegative integer count, got {text:?}"),
        })?;
        values.push(n);
    }
    check_header(&header, "detectors", values.len())?;
    Ok(DetectorCounts::new(values))
}

/// Write a square matrix (information, covariance, correlation, ...):
/// `# pixels=B kind=<label>`, one row per line.
pub fn write_square_matrix<S: Scalar>(path: &Path, m: &Matrix<S>, kind: &str) -> Result<()> {
    let mut out = format!("# pixels={} kind={kind}\n", m.n_rows());
    for r in 0..m.n_rows() {
        let row: Vec<String> = m.row(r).iter().map(|&v| fmt_float(v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write an iterate trajectory: `# pixels=B iterates=K`, one iterate per line.
pub fn write_trajectory<S: Scalar>(path: &Path, iterates: &[Vec<S>]) -> Result<()> {
    let pixels = iterates.first().map_or(0, Vec::len);
    let mut out = format!("# pixels={pixels} iterates={}\n", iterates.len());
    for it in iterates {
        let row: Vec<String> = it.iter().map(|&v| fmt_float(v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a per-pixel table with named columns; values may be absent.
/// Format: `# pixels=B`, then `pixel,<name1>,<name2>,...` and one row per
/// pixel with empty cells for absent values.
pub fn write_pixel_table<S: Scalar>(path: &Path, columns: &[(&str, Vec<Option<S>>)]) -> Result<()> {
    let pixels = columns.first().map_or(0, |(_, c)| c.len());
    let mut out = format!("# pixels={pixels}\n");
    let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
    let _ = writeln!(out, "pixel,{}", names.join(","));
    for b in 0..pixels {
        let mut cells = vec![(b + 1).to_string()];
        for (_, col) in columns {
            cells.push(col[b].map_or_else(String::new, fmt_float));
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_gaussian_system_matrix;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matrix.csv");
        let m = build_gaussian_system_matrix::<f64>(7, 7, 1.5).unwrap();
        write_system_matrix(&path, &m).unwrap();
        let back = read_system_matrix::<f64>(&path).unwrap();
        for b in 0..7 {
            assert_eq!(m.row(b), back.row(b), "row {b} changed in round trip");
        }
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# pixels=7 detectors=7\n"));
    }

    #[test]
    fn vector_and_counts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lp = dir.path().join("lambda.csv");
        let lambda = ChargeVector::new(vec![1.0, 0.25, 3.5e-7, 0.0]).unwrap();
        write_charge_vector(&lp, &lambda).unwrap();
        assert_eq!(read_charge_vector::<f64>(&lp).unwrap(), lambda);

        let cp = dir.path().join("counts.csv");
        let counts = DetectorCounts::new(vec![0, 7, 123456]);
        write_counts(&cp, &counts).unwrap();
        assert_eq!(read_counts(&cp).unwrap(), counts);
    }

    #[test]
    fn whole_floats_keep_a_decimal_point() {
        // "1" and "1.0" both parse, but the writer must emit a form that
        // makes the column type obvious.
        assert_eq!(fmt_float(1.0f64), "1.0");
        assert_eq!(fmt_float(0.5f64), "0.5");
    }

    #[test]
    fn header_mismatch_and_garbage_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        fs::write(&path, "# pixels=3\n1.0\n2.0\n").unwrap();
        match read_charge_vector::<f64>(&path) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("pixels=3")),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "1.0\nnot-a-number\n").unwrap();
        match read_charge_vector::<f64>(&path) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }

        fs::write(&path, "0.5,0.5\n0.25,0.25,0.5\n").unwrap();
        match read_system_matrix::<f64>(&path) {
            Err(Error::Parse { line: 2, message }) => {
                assert!(message.contains("columns"), "message: {message}")
            }
            other => panic!("expected ragged-row error, got {other:?}"),
        }

        // Counts must be integers.
        fs::write(&path, "1\n2.5\n").unwrap();
        assert!(read_counts(&path).is_err());
    }

    #[test]
    fn headerless_files_parse_fine() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.csv");
        fs::write(&path, "0.5,0.5\n0.25,0.75\n").unwrap();
        let m = read_system_matrix::<f64>(&path).unwrap();
        assert_eq!(m.n_pixels(), 2);
        assert_eq!(m.entry(1, 1), 0.75);
    }

    #[test]
    fn stochasticity_is_enforced_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("off.csv");
        fs::write(&path, "0.9,0.3\n0.5,0.5\n").unwrap();
        assert!(matches!(
            read_system_matrix::<f64>(&path),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pixel_table_renders_absent_cells_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        write_pixel_table(
            &path,
            &[
                ("se", vec![Some(1.5f64), Some(2.0)]),
                ("nts", vec![Some(0.5), None]),
            ],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("pixel,se,nts"));
        assert!(text.contains("1,1.5,0.5"));
        assert!(text.contains("2,2.0,"));
    }
}
