use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{check_dim, Ball, Point};

/// Lattice of centers times dyadic radii `2^k`, `k_min <= k <= k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallFamilySpec {
    pub k_min: i32,
    pub k_max: i32,
    /// Centers range over `[-extent, extent]^n` with spacing `step`.
    pub center_extent: f64,
    pub center_step: f64,
    /// Add balls centered at every singular point of the weight.
    pub include_singular: bool,
    /// Add balls whose boundary passes through a singular point.
    pub touching: bool,
    /// Add balls whose center sits at fractions of the radius away from a singular point.
    pub densify: bool,
}

impl Default for BallFamilySpec {
    fn default() -> Self {
        BallFamilySpec {
            k_min: -8,
            k_max: 4,
            center_extent: 2.0,
            center_step: 1.0,
            include_singular: true,
            touching: true,
            densify: false,
        }
    }
}

const DENSE_OFFSETS: [f64; 6] = [0.25, 0.5, 0.625, 0.75, 0.875, 0.9375];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub spec: BallFamilySpec,
    pub dim: usize,
    pub singular_centers: Vec<Point>,
    /// Built from an explicit ball list rather than a spec.
    pub explicit: bool,
    balls: Vec<Ball>,
}

impl BallFamily {
    pub fn generate(spec: &BallFamilySpec, dim: usize, singular_centers: &[Point]) -> Result<Self> {
        check_dim(dim)?;
        if spec.k_max - spec.k_min < 3 {
            return Err(Error::invalid("k_min", "radii must span at least 4 dyadic scales"));
        }
        if !(spec.center_step.is_finite() && spec.center_step > 0.0 && spec.center_extent >= 0.0) {
            return Err(Error::invalid("center_step", "must be positive with a non-negative extent"));
        }
        let steps = (spec.center_extent / spec.center_step + 1e-9).floor() as i64;
        let mut centers: Vec<Point> = Vec::new();
        let coords: Vec<f64> = (-steps..=steps).map(|i| i as f64 * spec.center_step).collect();
        match dim {
            1 => centers.extend(coords.iter().map(|&x| Point::scalar(x))),
            _ => {
                for &x in &coords {
                    for &y in &coords {
                        centers.push(Point::planar(x, y));
                    }
                }
            }
        }
        if spec.include_singular {
            for c in singular_centers {
                if !centers.iter().any(|p| p.dist(c) < 1e-14) {
                    centers.push(*c);
                }
            }
        }
        let directions: Vec<Point> = match dim {
            1 => vec![Point::scalar(1.0), Point::scalar(-1.0)],
            _ => vec![
                Point::planar(1.0, 0.0),
                Point::planar(-1.0, 0.0),
                Point::planar(0.0, 1.0),
                Point::planar(0.0, -1.0),
            ],
        };
        let mut balls = Vec::new();
        for k in spec.k_min..=spec.k_max {
            let r = 2f64.powi(k);
            for c in &centers {
                balls.push(Ball::new(*c, r)?);
            }
            for s in singular_centers {
                if spec.touching {
                    for d in &directions {
                        balls.push(Ball::new(s.offset(d, r), r)?);
                    }
                }
                if spec.densify {
                    for t in DENSE_OFFSETS {
                        for d in &directions {
                            balls.push(Ball::new(s.offset(d, t * r), r)?);
                        }
                    }
                }
            }
        }
        Ok(BallFamily {
            spec: spec.clone(),
            dim,
            singular_centers: singular_centers.to_vec(),
            explicit: false,
            balls,
        })
    }

    /// A family from explicit balls (must be non-empty, one dimension).
    pub fn from_balls(balls: Vec<Ball>) -> Result<Self> {
        let first = balls
            .first()
            .ok_or_else(|| Error::invalid("balls", "a ball family must be non-empty"))?;
        let dim = first.dim();
        if balls.iter().any(|b| b.dim() != dim) {
            return Err(Error::invalid("balls", "all balls must share one dimension"));
        }
        Ok(BallFamily {
            spec: BallFamilySpec::default(),
            dim,
            singular_centers: Vec::new(),
            explicit: true,
            balls,
        })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Same lattice with radii extended `level` octaves further toward zero.
    /// Explicit families are returned unchanged.
    pub fn refine(&self, level: u32) -> Result<Self> {
        if level == 0 || self.explicit {
            return Ok(self.clone());
        }
        let spec = BallFamilySpec {
            k_min: self.spec.k_min - level as i32,
            ..self.spec.clone()
        };
        Self::generate(&spec, self.dim, &self.singular_centers)
    }

    pub fn densified(&self) -> Result<Self> {
        if self.explicit {
            return Ok(self.clone());
        }
        let spec = BallFamilySpec {
            densify: true,
            ..self.spec.clone()
        };
        Self::generate(&spec, self.dim, &self.singular_centers)
    }
}
