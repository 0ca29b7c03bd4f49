use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSamples;
use crate::point::{Ball, Point};
use crate::polynomial::Polynomial;

/// Shape of a compactly supported function on its support ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Indicator,
    /// Polynomial in the local coordinate `u = (y - x0) / r`.
    Polynomial(Polynomial),
    /// `sign(u_1)`
    Sign,
    /// Multilinear interpolation of lattice samples in absolute coordinates;
    /// zero outside the lattice box.
    Grid(GridSamples),
}

/// Where a function lives, for quadrature purposes.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ball(Ball),
    /// Axis-aligned box with a preferred cell count per axis.
    Box { lo: Point, hi: Point, cells: [usize; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledFunction {
    pub support: Ball,
    pub profile: Profile,
    #[serde(default = "one")]
    pub coefficient: f64,
}

fn one() -> f64 {
    1.0
}

impl SampledFunction {
    pub fn new(support: Ball, profile: Profile) -> Result<Self> {
        let f = SampledFunction {
            support,
            profile,
            coefficient: 1.0,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn indicator(support: Ball) -> Self {
        SampledFunction {
            support,
            profile: Profile::Indicator,
            coefficient: 1.0,
        }
    }

    pub fn polynomial(support: Ball, p: Polynomial) -> Result<Self> {
        Self::new(support, Profile::Polynomial(p))
    }

    /// Samples on a lattice; the support is the ball circumscribing the lattice box.
    pub fn grid(samples: GridSamples) -> Result<Self> {
        let g = &samples.grid;
        let lo = Point::new(&g.lo)?;
        let hi = Point::new(&g.hi)?;
        let support = Ball::new(lo.add(&hi).scale(0.5), 0.5 * lo.dist(&hi))?;
        Self::new(support, Profile::Grid(samples))
    }

    pub fn read_csv(path: &Path, dim: usize) -> Result<Self> {
        Self::grid(GridSamples::read_csv(path, dim)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coefficient.is_finite() {
            return Err(Error::invalid("coefficient", "must be finite"));
        }
        Ball::new(self.support.center, self.support.radius)?;
        match &self.profile {
            Profile::Polynomial(p) if p.dim != self.dim() => Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim,
            }),
            Profile::Grid(g) if g.grid.dim() != self.dim() => Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: g.grid.dim(),
            }),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SampledFunction {
            coefficient: self.coefficient * c,
            ..self.clone()
        }
    }

    pub fn domain(&self) -> Domain {
        match &self.profile {
            Profile::Grid(g) => {
                let lo = Point::new(&g.grid.lo).expect("validated");
                let hi = Point::new(&g.grid.hi).expect("validated");
                let mut cells = [1, 1];
                for (i, c) in cells.iter_mut().enumerate().take(self.dim()) {
                    *c = g.grid.nodes[i] - 1;
                }
                Domain::Box { lo, hi, cells }
            }
            _ => Domain::Ball(self.support),
        }
    }

    #[inline]
    pub fn local(&self, y: &Point) -> Point {
        y.sub(&self.support.center).scale(1.0 / self.support.radius)
    }

    /// `f(y)`; zero off the support.
    pub fn eval(&self, y: &Point) -> f64 {
        let v = match &self.profile {
            Profile::Grid(g) => return g.eval(y).map(|v| self.coefficient * v).unwrap_or(0.0),
            _ if !self.support.contains(y) => return 0.0,
            Profile::Indicator => 1.0,
            Profile::Polynomial(p) => p.eval(&self.local(y)),
            Profile::Sign => {
                let u = y.get(0) - self.support.center.get(0);
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        self.coefficient * v
    }

    /// Points where the profile is discontinuous inside the support (1-D only).
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            Profile::Sign if self.dim() == 1 => vec![self.support.center.get(0)],
            Profile::Grid(g) if self.dim() == 1 => {
                (0..g.grid.nodes[0]).map(|k| g.grid.node(&[k]).get(0)).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Closed interval carrying the support (n = 1).
    pub fn interval(&self) -> (f64, f64) {
        match self.domain() {
            Domain::Ball(b) => (b.center.get(0) - b.radius, b.center.get(0) + b.radius),
            Domain::Box { lo, hi, .. } => (lo.get(0), hi.get(0)),
        }
    }
}
