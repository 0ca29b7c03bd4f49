//! Matrix families and the decomposition of R^n around an atom's ball into
//! expanded balls `B(A_i x0, 2 M r)` and nearest-center outer regions.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{check_dim, Ball, Point};
use crate::quadrature::QuadratureScheme;
use crate::weights::{BallFamily, WeightSpec};

pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

/// Which operator norm defines `M = max_j ||A_j||`. Both bound `|A ξ| <= ||A|| |ξ|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    #[default]
    Spectral,
    Frobenius,
}

/// A real n x n matrix with n <= 2, stored inline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearMap {
    pub dim: usize,
    pub m: [[f64; 2]; 2],
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        LinearMap {
            dim,
            m: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        LinearMap {
            dim,
            m: [[s, 0.0], [0.0, s]],
        }
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::invalid(
                "matrix",
                format!("expected {} entries, found {}", dim * dim, entries.len()),
            ));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("matrix", "entries must be finite"));
        }
        let mut m = [[0.0; 2]; 2];
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = entries[i * dim + j];
            }
        }
        Ok(LinearMap { dim, m })
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                v.push(self.m[i][j]);
            }
        }
        v
    }

    #[inline]
    pub fn apply(&self, x: &Point) -> Point {
        match self.dim {
            1 => Point::scalar(self.m[0][0] * x.get(0)),
            _ => Point::planar(
                self.m[0][0] * x.get(0) + self.m[0][1] * x.get(1),
                self.m[1][0] * x.get(0) + self.m[1][1] * x.get(1),
            ),
        }
    }

    pub fn sub(&self, other: &LinearMap) -> LinearMap {
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.m[i][j] - other.m[i][j];
            }
        }
        LinearMap { dim: self.dim, m }
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            _ => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
        }
    }

    pub fn inverse(&self) -> Option<LinearMap> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(match self.dim {
            1 => LinearMap::scalar(1, 1.0 / self.m[0][0]),
            _ => LinearMap {
                dim: 2,
                m: [
                    [self.m[1][1] / d, -self.m[0][1] / d],
                    [-self.m[1][0] / d, self.m[0][0] / d],
                ],
            },
        })
    }

    fn to_nalgebra(self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.m[i][j])
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.to_nalgebra().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        let min = *s.last().expect("non-empty");
        if min == 0.0 {
            f64::INFINITY
        } else {
            s[0] / min
        }
    }

    pub fn norm(&self, kind: MatrixNorm) -> f64 {
        match kind {
            MatrixNorm::Spectral => operator_norm(self),
            MatrixNorm::Frobenius => self.row_major().iter().map(|e| e * e).sum::<f64>().sqrt(),
        }
    }
}

/// Spectral norm (largest singular value).
pub fn operator_norm(a: &LinearMap) -> f64 {
    a.singular_values()[0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFamilySpec {
    pub dim: usize,
    /// One row-major entry list per matrix.
    pub matrices: Vec<Vec<f64>>,
    #[serde(default)]
    pub norm: MatrixNorm,
    #[serde(default = "default_cap")]
    pub condition_cap: f64,
}

fn default_cap() -> f64 {
    DEFAULT_CONDITION_CAP
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFamily {
    dim: usize,
    matrices: Vec<LinearMap>,
    inverses: Vec<LinearMap>,
    conditions: Vec<f64>,
    norm_bound: f64,
    norm: MatrixNorm,
    condition_cap: f64,
}

impl MatrixFamily {
    pub fn new(dim: usize, matrices: Vec<LinearMap>) -> Result<Self> {
        Self::with_options(dim, matrices, MatrixNorm::Spectral, DEFAULT_CONDITION_CAP)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, vec![LinearMap::identity(dim)]).expect("identity is invertible")
    }

    pub fn scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.iter().map(|&v| LinearMap::scalar(1, v)).collect())
    }

    pub fn with_options(dim: usize, matrices: Vec<LinearMap>, norm: MatrixNorm, condition_cap: f64) -> Result<Self> {
        check_dim(dim)?;
        if matrices.is_empty() {
            return Err(Error::invalid("matrices", "at least one matrix is required"));
        }
        let mut inverses = Vec::with_capacity(matrices.len());
        let mut conditions = Vec::with_capacity(matrices.len());
        for (index, a) in matrices.iter().enumerate() {
            if a.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.dim,
                });
            }
            let condition = a.condition_number();
            if !(condition < condition_cap) {
                return Err(Error::SingularMatrix { index, condition });
            }
            inverses.push(a.inverse().ok_or(Error::SingularMatrix { index, condition })?);
            conditions.push(condition);
        }
        let norm_bound = matrices.iter().map(|a| a.norm(norm)).fold(0.0, f64::max);
        Ok(MatrixFamily {
            dim,
            matrices,
            inverses,
            conditions,
            norm_bound,
            norm,
            condition_cap,
        })
    }

    pub fn from_spec(spec: &MatrixFamilySpec) -> Result<Self> {
        let maps = spec
            .matrices
            .iter()
            .map(|e| LinearMap::from_row_major(spec.dim, e))
            .collect::<Result<Vec<_>>>()?;
        Self::with_options(spec.dim, maps, spec.norm, spec.condition_cap)
    }

    pub fn to_spec(&self) -> MatrixFamilySpec {
        MatrixFamilySpec {
            dim: self.dim,
            matrices: self.matrices.iter().map(LinearMap::row_major).collect(),
            norm: self.norm,
            condition_cap: self.condition_cap,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[LinearMap] {
        &self.matrices
    }

    pub fn matrix(&self, j: usize) -> &LinearMap {
        &self.matrices[j]
    }

    pub fn inverse(&self, j: usize) -> &LinearMap {
        &self.inverses[j]
    }

    pub fn conditions(&self) -> &[f64] {
        &self.conditions
    }

    /// `M = max_j ||A_j||`.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn is_identity_family(&self) -> bool {
        self.matrices.iter().all(|a| *a == LinearMap::identity(self.dim))
    }

    /// Condition numbers of `A_i - A_j`, `i < j`; fails on the first one above the cap.
    pub fn check_differences_invertible(&self) -> Result<Vec<(usize, usize, f64)>> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let condition = self.matrices[i].sub(&self.matrices[j]).condition_number();
                if !(condition < self.condition_cap) {
                    return Err(Error::SingularDifference { i, j, condition });
                }
                out.push((i, j, condition));
            }
        }
        Ok(out)
    }
}

/// `B_i* = B(A_i x0, 2 M r)` for each matrix of the family.
pub fn expanded_balls(ball: &Ball, family: &MatrixFamily) -> Vec<Ball> {
    let radius = 2.0 * family.norm_bound() * ball.radius;
    family
        .matrices()
        .iter()
        .map(|a| Ball {
            center: a.apply(&ball.center),
            radius,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    /// In the closed expanded ball `B_i*` (smallest such `i`).
    Inside(usize),
    /// Outside every expanded ball; `A_k x0` is the nearest transformed center (smallest such `k`).
    Outer(usize),
}

impl RegionLabel {
    pub fn index(&self) -> usize {
        match *self {
            RegionLabel::Inside(i) | RegionLabel::Outer(i) => i,
        }
    }

    pub fn is_outer(&self) -> bool {
        matches!(self, RegionLabel::Outer(_))
    }
}

pub fn classify(x: &Point, ball: &Ball, family: &MatrixFamily) -> RegionLabel {
    let radius = 2.0 * family.norm_bound() * ball.radius;
    let mut nearest = (0, f64::INFINITY);
    for (i, a) in family.matrices().iter().enumerate() {
        let d = x.dist(&a.apply(&ball.center));
        if d <= radius {
            return RegionLabel::Inside(i);
        }
        if d < nearest.1 {
            nearest = (i, d);
        }
    }
    RegionLabel::Outer(nearest.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    #[serde(with = "crate::report::ext_f64")]
    pub worst_ratio: f64,
    pub witness: Option<Ball>,
    pub matrix_index: Option<usize>,
    pub balls: usize,
}

/// `max_{B, j} w(B(A_j x0, 2 M r)) / w(B(x0, r))` over the family.
pub fn matrix_doubling_check(
    w: &WeightSpec,
    family: &MatrixFamily,
    balls: &BallFamily,
    scheme: &QuadratureScheme,
) -> Result<DoublingReport> {
    let per_ball: Vec<(f64, usize)> = balls
        .balls()
        .par_iter()
        .map(|b| -> Result<(f64, usize)> {
            let base = w.measure(1.0, b, scheme)?;
            let mut best = (0.0, 0);
            for (j, e) in expanded_balls(b, family).iter().enumerate() {
                let r = w.measure(1.0, e, scheme)? / base;
                if r > best.0 {
                    best = (r, j);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut out = DoublingReport {
        worst_ratio: 0.0,
        witness: None,
        matrix_index: None,
        balls: balls.len(),
    };
    for (b, (r, j)) in balls.balls().iter().zip(per_ball) {
        if r > out.worst_ratio {
            out.worst_ratio = r;
            out.witness = Some(*b);
            out.matrix_index = Some(j);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(a: f64, b: f64, c: f64, d: f64) -> LinearMap {
        LinearMap::from_row_major(2, &[a, b, c, d]).unwrap()
    }

    /// Largest singular value of a 2x2 matrix from the closed form
    /// `sqrt((T + sqrt(T^2 - 4 D^2)) / 2)`, `T = ||A||_F^2`, `D = det A`.
    fn closed_form_norm(a: &LinearMap) -> f64 {
        let t: f64 = a.row_major().iter().map(|e| e * e).sum();
        let d = a.det();
        ((t + (t * t - 4.0 * d * d).max(0.0).sqrt()) / 2.0).sqrt()
    }

    #[test]
    fn spectral_norm_anchors() {
        assert!((operator_norm(&LinearMap::identity(2)) - 1.0).abs() < 1e-12);
        assert!((operator_norm(&two_by_two(3.0, 0.0, 0.0, 0.5)) - 3.0).abs() < 1e-12);
        let rot = two_by_two(0.0, 2.0, -2.0, 0.0);
        assert!((operator_norm(&rot) - closed_form_norm(&rot)).abs() < 1e-12);
        assert!((operator_norm(&rot) - 2.0).abs() < 1e-12);
        for (a, b, c, d) in [(1.0, 2.0, 3.0, 4.0), (0.3, -1.1, 2.5, 0.2), (1.0, 1e3, 0.0, 1.0)] {
            let m = two_by_two(a, b, c, d);
            let exact = closed_form_norm(&m);
            assert!((operator_norm(&m) - exact).abs() <= 1e-8 * exact);
        }
    }

    #[test]
    fn singular_matrices_are_rejected_with_index() {
        let err = MatrixFamily::new(2, vec![LinearMap::identity(2), two_by_two(1.0, 2.0, 2.0, 4.0)]).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { index: 1, .. }));
        let fam = MatrixFamily::new(1, vec![LinearMap::scalar(1, 1.0), LinearMap::scalar(1, 1.0)]).unwrap();
        assert!(matches!(fam.check_differences_invertible(), Err(Error::SingularDifference { i: 0, j: 1, .. })));
        let ok = MatrixFamily::scalars(&[1.0, -1.0]).unwrap();
        assert_eq!(ok.check_differences_invertible().unwrap().len(), 1);
    }

    #[test]
    fn expanded_balls_anchors() {
        let fam = MatrixFamily::scalars(&[1.0, -1.0]).unwrap();
        let b = Ball::new(Point::scalar(1.0), 0.1).unwrap();
        let e = expanded_balls(&b, &fam);
        assert_eq!(e[0].center, Point::scalar(1.0));
        assert_eq!(e[1].center, Point::scalar(-1.0));
        assert!((e[0].radius - 0.2).abs() < 1e-15 && (e[1].radius - 0.2).abs() < 1e-15);

        let fam2 = MatrixFamily::new(2, vec![LinearMap::scalar(2, 2.0)]).unwrap();
        let e2 = expanded_balls(&Ball::new(Point::origin(2), 1.0).unwrap(), &fam2);
        assert_eq!(e2[0].center, Point::origin(2));
        assert!((e2[0].radius - 4.0).abs() < 1e-12);

        let ids = MatrixFamily::new(1, vec![LinearMap::identity(1); 3]).unwrap();
        let e3 = expanded_balls(&b, &ids);
        assert!(e3.iter().all(|x| x.center == b.center && (x.radius - 0.2).abs() < 1e-15));
    }

    #[test]
    fn classify_anchors() {
        let fam = MatrixFamily::scalars(&[1.0, -1.0]).unwrap();
        let b = Ball::new(Point::scalar(1.0), 0.1).unwrap();
        assert_eq!(classify(&Point::scalar(2.0), &b, &fam), RegionLabel::Outer(0));
        assert_eq!(classify(&Point::scalar(1.05), &b, &fam), RegionLabel::Inside(0));
        assert_eq!(classify(&Point::scalar(0.0), &b, &fam), RegionLabel::Outer(0));
        assert_eq!(classify(&Point::scalar(-1.1), &b, &fam), RegionLabel::Inside(1));
        // boundary counts as inside
        assert_eq!(classify(&Point::scalar(1.2), &b, &fam), RegionLabel::Inside(0));
    }
}
