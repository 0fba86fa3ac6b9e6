//! Sweep grids: `lin:a:b:n`, `log:a:b:n` or `list:v1,v2,...`.

use super::config::parse_number;
use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Lin { start: f64, stop: f64, count: usize },
    Log { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl Grid {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Config(format!("grid {spec:?}: expected kind:...")))?;
        let grid = match kind {
            "lin" | "log" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!("grid {spec:?}: expected {kind}:start:stop:count")));
                }
                let start = parse_number(parts[0])?;
                let stop = parse_number(parts[1])?;
                let count = parse_number(parts[2])?;
                if count < 1.0 || count.fract() != 0.0 {
                    return Err(Error::Config(format!("grid {spec:?}: count must be a positive integer")));
                }
                let count = count as usize;
                if kind == "lin" {
                    Grid::Lin { start, stop, count }
                } else {
                    if !(start > 0.0 && stop > 0.0) {
                        return Err(Error::Config(format!("grid {spec:?}: log grids need positive bounds")));
                    }
                    Grid::Log { start, stop, count }
                }
            }
            "list" => Grid::List(rest.split(',').map(parse_number).collect::<Result<_>>()?),
            _ => return Err(Error::Config(format!("grid {spec:?}: unknown kind {kind:?}"))),
        };
        let n = grid.len();
        if n == 0 || n > MAX_POINTS {
            return Err(Error::Config(format!("grid {spec:?}: {n} points, need 1..={MAX_POINTS}")));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Lin { count, .. } | Grid::Log { count, .. } => *count,
            Grid::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        let frac = |i: usize, n: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        match self {
            Grid::Lin { start, stop, count } => (0..*count).map(|i| start + (stop - start) * frac(i, *count)).collect(),
            Grid::Log { start, stop, count } => {
                let (a, b) = (start.log10(), stop.log10());
                (0..*count).map(|i| 10f64.powf(a + (b - a) * frac(i, *count))).collect()
            }
            Grid::List(v) => v.clone(),
        }
    }
}
