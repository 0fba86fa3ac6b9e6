//! Result tables and their CSV form.

use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Num(v) => write!(out, "{v:.16e}").expect("write to String"),
            Cell::Flag(b) => out.push_str(if *b { "true" } else { "false" }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// Grid coordinates, printed even when the row failed.
    pub key: Vec<f64>,
    pub cells: std::result::Result<Vec<Cell>, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// Column names with units, key columns first.
    pub key_columns: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

fn bare(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

impl Table {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.cells.is_err()).count()
    }

    /// Index of a value column by name (units ignored).
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| bare(c) == name)
    }

    /// Keeps only the named value columns, in the given order.
    pub fn select(mut self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column(n).ok_or_else(|| Error::Config(format!("unknown output column {n:?}"))))
            .collect::<Result<_>>()?;
        self.columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        for row in &mut self.rows {
            if let Ok(cells) = &row.cells {
                row.cells = Ok(idx.iter().map(|&i| cells[i]).collect());
            }
        }
        Ok(self)
    }

    pub fn to_csv(&self, mode: &str) -> String {
        let mut out = String::new();
        writeln!(out, "# magnetofisher v{} mode={mode}", env!("CARGO_PKG_VERSION")).expect("write to String");
        let header: Vec<&str> = self.key_columns.iter().chain(self.columns.iter()).map(String::as_str).collect();
        out.push_str(&header.join(","));
        out.push_str(",error\n");
        for row in &self.rows {
            for k in &row.key {
                Cell::Num(*k).render(&mut out);
                out.push(',');
            }
            match &row.cells {
                Ok(cells) => {
                    for c in cells {
                        c.render(&mut out);
                        out.push(',');
                    }
                }
                Err(msg) => {
                    out.push_str(&",".repeat(self.columns.len()));
                    out.push_str(&msg.replace([',', '\n', '\r'], ";"));
                }
            }
            out.push('\n');
        }
        out
    }
}
