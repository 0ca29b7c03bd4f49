//! Points and balls in R^n for n in {1, 2}.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// A point of R^1 or R^2, stored inline so hot quadrature loops never allocate.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        let dim = coords.len();
        check_dim(dim)?;
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(coords);
        Ok(Point { coords: c, dim: dim as u8 })
    }

    pub fn scalar(x: f64) -> Self {
        Point { coords: [x, 0.0], dim: 1 }
    }

    pub fn planar(x: f64, y: f64) -> Self {
        Point { coords: [x, y], dim: 2 }
    }

    pub fn origin(dim: usize) -> Self {
        Point { coords: [0.0; MAX_DIM], dim: dim as u8 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        self.coords[i] = v;
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        match self.dim {
            1 => self.coords[0].abs(),
            _ => self.coords[0].hypot(self.coords[1]),
        }
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    #[inline]
    pub fn sub(&self, other: &Point) -> Point {
        Point {
            coords: [self.coords[0] - other.coords[0], self.coords[1] - other.coords[1]],
            dim: self.dim,
        }
    }

    #[inline]
    pub fn add(&self, other: &Point) -> Point {
        Point {
            coords: [self.coords[0] + other.coords[0], self.coords[1] + other.coords[1]],
            dim: self.dim,
        }
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Point {
        Point {
            coords: [self.coords[0] * s, self.coords[1] * s],
            dim: self.dim,
        }
    }

    /// `self + s * dir`
    #[inline]
    pub fn offset(&self, dir: &Point, s: f64) -> Point {
        Point {
            coords: [
                self.coords[0] + s * dir.coords[0],
                self.coords[1] + s * dir.coords[1],
            ],
            dim: self.dim,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords().to_vec()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.to_vec()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(&v)
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        Err(Error::UnsupportedDimension(dim))
    } else {
        Ok(())
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be finite and positive, got {radius}")));
        }
        if center.coords().iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("center", "coordinates must be finite"));
        }
        Ok(Ball { center, radius })
    }

    /// Interval `[lo, hi]` as a ball of R^1.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ball::new(Point::scalar(0.5 * (lo + hi)), 0.5 * (hi - lo))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }

    /// Closed-ball membership.
    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        self.center.dist(p) <= self.radius
    }

    /// Same center, radius multiplied by `factor`.
    pub fn dilate(&self, factor: f64) -> Ball {
        Ball {
            center: self.center,
            radius: self.radius * factor,
        }
    }
}
