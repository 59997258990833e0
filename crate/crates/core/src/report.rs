//! CSV output of sweep results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{OiaError, Result};
use crate::experiment::ResultRow;

pub const CSV_HEADER: &str = "nt,nr,snr_db,trials_used,discarded_trials,avg_unused_modes,stderr_unused_modes,avg_rate_primary,stderr_rate_primary,avg_rate_secondary_uniform,stderr_rate_secondary_uniform,avg_rate_secondary_optimal,stderr_rate_secondary_optimal";

/// Significant digits used for every real column.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats `x` like C's `%.{digits}g`.
pub fn format_significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= digits as i32 {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exponent.abs())
    } else {
        let decimals = (digits as i32 - 1 - exponent) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn real(x: f64) -> String {
    format_significant(x, SIGNIFICANT_DIGITS)
}

/// One CSV data line, without the trailing newline.
pub fn csv_line(row: &ResultRow) -> String {
    [
        row.nt.to_string(),
        row.nr.to_string(),
        real(row.snr_db),
        row.trials_used.to_string(),
        row.discarded_trials.to_string(),
        real(row.avg_unused_modes),
        real(row.stderr_unused_modes),
        real(row.avg_rate_primary),
        real(row.stderr_rate_primary),
        real(row.avg_rate_secondary_uniform),
        real(row.stderr_rate_secondary_uniform),
        real(row.avg_rate_secondary_optimal),
        real(row.stderr_rate_secondary_optimal),
    ]
    .join(",")
}

/// Writes the header and one line per row to `out`.
pub fn write_csv_to<W: Write>(rows: &[ResultRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", csv_line(row))?;
    }
    out.flush()
}

/// Writes `rows` as CSV to the file at `path`.
pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(OiaError::InvalidInput("no result rows to write".into()));
    }
    let io_err = |source| OiaError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_csv_to(rows, &mut out).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            nt: 2,
            nr: 2,
            snr_db: -20.0,
            trials_used: 10,
            discarded_trials: 0,
            avg_unused_modes: 1.0,
            stderr_unused_modes: 0.0,
            avg_rate_primary: 2.0 / 3.0,
            stderr_rate_primary: 1.234_567_891_23e-5,
            avg_rate_secondary_uniform: 12_345.678_912_3,
            stderr_rate_secondary_uniform: 1e10,
            avg_rate_secondary_optimal: 0.1,
            stderr_rate_secondary_optimal: 0.000_123_456_789_12,
        }
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(-20.0, 9), "-20");
        assert_eq!(format_significant(2.5, 9), "2.5");
        assert_eq!(format_significant(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(format_significant(1.234_567_891_23e-5, 9), "1.23456789e-05");
        assert_eq!(format_significant(0.000_123_456_789_12, 9), "0.000123456789");
        assert_eq!(format_significant(12_345.678_912_3, 9), "12345.6789");
        assert_eq!(format_significant(1e10, 9), "1e+10");
        assert_eq!(format_significant(123_456_789.0, 9), "123456789");
        assert_eq!(format_significant(9.999_999_999_9, 9), "10");
        assert_eq!(format_significant(1.5849625007211563, 9), "1.5849625");
    }

    #[test]
    fn single_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&[row()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "2,2,-20,10,0,1,0,0.666666667,1.23456789e-05,12345.6789,1e+10,0.1,0.000123456789"
        );
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn empty_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_csv(&[], &dir.path().join("x.csv")),
            Err(OiaError::InvalidInput(_))
        ));
    }

    #[test]
    fn unwritable_destination_names_path() {
        let err = write_csv(&[row()], Path::new("/nonexistent-dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }
}
