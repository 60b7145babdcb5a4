//! Plain CSV emission: `.` decimal separator, no thousands separators,
//! 17 significant digits for reals.

use std::io::{self, Write};

/// Formats a real with 17 significant digits (round-trips exactly).
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A cell of a CSV table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Real(f64),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::UInt(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::UInt(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::UInt(u) => u.to_string(),
            Cell::Real(x) => fmt_real(x),
        }
    }
}

/// Writes a header line followed by one line per row.
pub fn write_csv<W: Write>(mut out: W, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|c| c.render()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
