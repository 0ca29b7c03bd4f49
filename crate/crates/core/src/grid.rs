//! Regular node lattices with multilinear interpolation and CSV import.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{check_dim, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Number of nodes per axis (at least 2).
    pub nodes: Vec<usize>,
}

impl RegularGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        let g = RegularGrid { lo, hi, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.lo.len();
        check_dim(dim)?;
        if self.hi.len() != dim || self.nodes.len() != dim {
            return Err(Error::invalid("grid", "lo, hi and nodes must have the same length"));
        }
        for i in 0..dim {
            if !(self.lo[i].is_finite() && self.hi[i].is_finite() && self.hi[i] > self.lo[i]) {
                return Err(Error::invalid("grid", format!("axis {i} must satisfy lo < hi")));
            }
            if self.nodes[i] < 2 {
                return Err(Error::invalid("grid", format!("axis {i} needs at least 2 nodes")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.nodes[axis] - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, index: &[usize]) -> Point {
        let c: Vec<f64> = (0..self.dim()).map(|i| self.lo[i] + index[i] as f64 * self.spacing(i)).collect();
        Point::new(&c).expect("grid dimension validated")
    }

    fn flat(&self, index: &[usize]) -> usize {
        match self.dim() {
            1 => index[0],
            _ => index[0] * self.nodes[1] + index[1],
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        let slack = 1e-12;
        (0..self.dim()).all(|i| {
            let h = self.hi[i] - self.lo[i];
            x.get(i) >= self.lo[i] - slack * h && x.get(i) <= self.hi[i] + slack * h
        })
    }

    /// Multilinear interpolation of node `values` (row-major, last axis fastest).
    pub fn interpolate(&self, values: &[f64], x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        if !self.contains(x) {
            return Err(Error::OutOfGrid { point: x.to_vec() });
        }
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for i in 0..self.dim() {
            let t = ((x.get(i) - self.lo[i]) / self.spacing(i)).clamp(0.0, (self.nodes[i] - 1) as f64);
            let k = (t.floor() as usize).min(self.nodes[i] - 2);
            base[i] = k;
            frac[i] = t - k as f64;
        }
        Ok(match self.dim() {
            1 => values[base[0]] * (1.0 - frac[0]) + values[base[0] + 1] * frac[0],
            _ => {
                let v = |a: usize, b: usize| values[self.flat(&[base[0] + a, base[1] + b])];
                let (s, t) = (frac[0], frac[1]);
                v(0, 0) * (1.0 - s) * (1.0 - t) + v(1, 0) * s * (1.0 - t) + v(0, 1) * (1.0 - s) * t + v(1, 1) * s * t
            }
        })
    }
}

/// Lattice samples read from CSV rows `(x_1, ..., x_n, value)`, in any order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSamples {
    pub grid: RegularGrid,
    pub values: Vec<f64>,
}

impl GridSamples {
    pub fn new(grid: RegularGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} samples, found {}", grid.len(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "samples must be finite"));
        }
        Ok(GridSamples { grid, values })
    }

    pub fn read_csv(path: &Path, dim: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path)?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == dim + 1 => rows.push(v),
                // a header line is tolerated only as the first row
                Err(_) if rows.is_empty() => continue,
                Ok(v) => {
                    return Err(Error::Parse(format!(
                        "{}: expected {} columns, found {}",
                        path.display(),
                        dim + 1,
                        v.len()
                    )))
                }
                Err(e) => return Err(Error::Parse(format!("{}: {e}", path.display()))),
            }
        }
        Self::from_rows(&rows, dim)
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for row in rows {
            for (i, axis) in axes.iter_mut().enumerate() {
                axis.push(row[i]);
            }
        }
        for axis in axes.iter_mut() {
            axis.sort_by(f64::total_cmp);
            axis.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let lo: Vec<f64> = axes.iter().map(|a| a.first().copied().unwrap_or(0.0)).collect();
        let hi: Vec<f64> = axes.iter().map(|a| a.last().copied().unwrap_or(0.0)).collect();
        let nodes: Vec<usize> = axes.iter().map(Vec::len).collect();
        let grid = RegularGrid::new(lo, hi, nodes)?;
        for (i, axis) in axes.iter().enumerate() {
            let h = grid.spacing(i);
            for (k, v) in axis.iter().enumerate() {
                if (grid.lo[i] + k as f64 * h - v).abs() > 1e-9 * h {
                    return Err(Error::Parse(format!("axis {i} is not uniformly spaced")));
                }
            }
        }
        if rows.len() != grid.len() {
            return Err(Error::Parse(format!(
                "expected a complete lattice of {} rows, found {}",
                grid.len(),
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; grid.len()];
        for row in rows {
            let idx: Vec<usize> = (0..dim)
                .map(|i| ((row[i] - grid.lo[i]) / grid.spacing(i)).round() as usize)
                .collect();
            values[grid.flat(&idx)] = row[dim];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("duplicate lattice rows".into()));
        }
        GridSamples::new(grid, values)
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        self.grid.interpolate(&self.values, x)
    }
}
