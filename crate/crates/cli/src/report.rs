//! Versioned CSV reports.
//!
//! The first line is the comment `# boxlab-report-v1`, then a header row.
//! Bound reports have the columns
//! `k,lhs,lhs_decimal,rhs,rhs_decimal,slack,slack_decimal`: exact values as
//! fraction strings (`a+b*sqrt2` for elements of ℚ(√2)) next to 17-digit
//! decimals. A value that is only known as a float repeats the float in the
//! exact column. `slack = rhs − lhs`, so a negative slack is a violation.

use std::io::Write;
use std::path::Path;

use boxlab::numerics::{Field, QSqrt2};

use crate::error::{CliError, CliResult};

pub const REPORT_HEADER: &str = "# boxlab-report-v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(QSqrt2),
    Float(f64),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match self {
            Self::Exact(v) => v.as_f64(),
            Self::Float(v) => *v,
        }
    }

    pub fn exact_string(&self) -> String {
        match self {
            Self::Exact(v) => v.to_exact_string(),
            Self::Float(v) => format!("{v:?}"),
        }
    }

    /// `rhs − self`, exact when both sides are.
    pub fn slack_to(&self, rhs: &Value) -> Value {
        match (self, rhs) {
            (Self::Exact(l), Self::Exact(r)) => Self::Exact(r.clone() - l),
            _ => Self::Float(rhs.as_f64() - self.as_f64()),
        }
    }
}

impl From<QSqrt2> for Value {
    fn from(v: QSqrt2) -> Self {
        Self::Exact(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

pub fn decimal(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub k: String,
    pub lhs: Value,
    pub rhs: Value,
}

impl BoundRow {
    pub fn new(k: impl ToString, lhs: impl Into<Value>, rhs: impl Into<Value>) -> Self {
        Self {
            k: k.to_string(),
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }

    pub fn slack(&self) -> Value {
        self.lhs.slack_to(&self.rhs)
    }
}

fn writer<W: Write>(mut out: W) -> CliResult<csv::Writer<W>> {
    writeln!(out, "{REPORT_HEADER}").map_err(|e| CliError::Csv(e.into()))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out))
}

pub fn write_bound_rows<W: Write>(out: W, rows: &[BoundRow]) -> CliResult<()> {
    let mut w = writer(out)?;
    w.write_record([
        "k",
        "lhs",
        "lhs_decimal",
        "rhs",
        "rhs_decimal",
        "slack",
        "slack_decimal",
    ])?;
    for row in rows {
        let slack = row.slack();
        w.write_record([
            row.k.clone(),
            row.lhs.exact_string(),
            decimal(row.lhs.as_f64()),
            row.rhs.exact_string(),
            decimal(row.rhs.as_f64()),
            slack.exact_string(),
            decimal(slack.as_f64()),
        ])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

/// A plain table under the same versioned header.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = writer(out)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

pub fn create(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::create(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use boxlab::numerics::rat;

    #[test]
    fn bound_report_layout() {
        let rows = [
            BoundRow::new(0, QSqrt2::from(rat(1, 4)), QSqrt2::from(rat(1, 2))),
            BoundRow::new(1, QSqrt2::sqrt2(), 1.5),
        ];
        let mut buf = Vec::new();
        write_bound_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(
            lines[1],
            "k,lhs,lhs_decimal,rhs,rhs_decimal,slack,slack_decimal"
        );
        assert!(lines[2].starts_with("0,1/4,2.5000000000000000e-1,1/2,5.0000000000000000e-1,1/4,"));
        assert!(lines[3].starts_with("1,0/1+1/1*sqrt2,"));
        assert!(!text.contains('\r'));
    }
}
