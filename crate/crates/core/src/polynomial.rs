//! Polynomials in local ball coordinates `u = (y - x0) / r` and exact
//! monomial moments over the unit ball.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{check_dim, Point};

/// Exponents of the monomials of total degree `<= degree`, graded then lexicographic.
pub fn monomials(dim: usize, degree: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for total in 0..=degree {
        match dim {
            1 => out.push([total, 0]),
            _ => {
                for a in (0..=total).rev() {
                    out.push([a, total - a]);
                }
            }
        }
    }
    out
}

/// `Γ(k / 2)` for a positive integer `k`.
fn gamma_half(k: usize) -> f64 {
    let mut g = if k % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if k % 2 == 0 { 1.0 } else { 0.5 };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `∫_{|u| <= 1} u^β du`.
pub fn unit_ball_moment(dim: usize, beta: [usize; 2]) -> f64 {
    match dim {
        1 => {
            if beta[0] % 2 == 1 {
                0.0
            } else {
                2.0 / (beta[0] as f64 + 1.0)
            }
        }
        _ => {
            let (a, b) = (beta[0], beta[1]);
            if a % 2 == 1 || b % 2 == 1 {
                return 0.0;
            }
            2.0 * gamma_half(a + 1) * gamma_half(b + 1) / ((a + b + 2) as f64 * gamma_half(a + b + 2))
        }
    }
}

#[inline]
pub fn monomial(beta: [usize; 2], u: &Point) -> f64 {
    let mut v = u.get(0).powi(beta[0] as i32);
    if u.dim() == 2 {
        v *= u.get(1).powi(beta[1] as i32);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polynomial {
    pub dim: usize,
    pub degree: usize,
    /// Coefficients in the order of [`monomials`].
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        let expected = monomials(dim, degree).len();
        if coeffs.len() != expected {
            return Err(Error::invalid(
                "coeffs",
                format!("degree {degree} in dimension {dim} needs {expected} coefficients, got {}", coeffs.len()),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "coefficients must be finite"));
        }
        Ok(Polynomial { dim, degree, coeffs })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Polynomial {
            dim,
            degree: 0,
            coeffs: vec![c],
        }
    }

    pub fn eval(&self, u: &Point) -> f64 {
        match self.dim {
            1 => {
                let x = u.get(0);
                self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            _ => monomials(2, self.degree)
                .iter()
                .zip(&self.coeffs)
                .map(|(b, c)| c * monomial(*b, u))
                .sum(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Polynomial {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }

    /// `∫_{|u| <= 1} u^β P(u) du`, exact.
    pub fn unit_moment(&self, beta: [usize; 2]) -> f64 {
        monomials(self.dim, self.degree)
            .iter()
            .zip(&self.coeffs)
            .map(|(g, c)| c * unit_ball_moment(self.dim, [g[0] + beta[0], g[1] + beta[1]]))
            .sum()
    }

    pub fn l2_unit_norm(&self) -> f64 {
        let mons = monomials(self.dim, self.degree);
        let mut s = 0.0;
        for (gi, ci) in mons.iter().zip(&self.coeffs) {
            for (gj, cj) in mons.iter().zip(&self.coeffs) {
                s += ci * cj * unit_ball_moment(self.dim, [gi[0] + gj[0], gi[1] + gj[1]]);
            }
        }
        s.max(0.0).sqrt()
    }

    /// Removes the `L^2(unit ball)` projection onto polynomials of degree `<= d`,
    /// so every moment of order `<= d` of the result vanishes.
    pub fn project_out_low_degree(&self, d: usize) -> Result<Self> {
        let low = monomials(self.dim, d);
        let high = monomials(self.dim, self.degree);
        let k = low.len();
        let gram = DMatrix::from_fn(k, k, |i, j| {
            unit_ball_moment(self.dim, [low[i][0] + low[j][0], low[i][1] + low[j][1]])
        });
        let rhs = DVector::from_fn(k, |i, _| self.unit_moment(low[i]));
        let sol = gram
            .cholesky()
            .ok_or_else(|| Error::invalid("d", "moment Gram matrix is not positive definite"))?
            .solve(&rhs);
        let degree = self.degree.max(d);
        let mut coeffs = vec![0.0; monomials(self.dim, degree).len()];
        let all = monomials(self.dim, degree);
        for (g, c) in high.iter().zip(&self.coeffs) {
            let idx = all.iter().position(|m| m == g).expect("monomial present");
            coeffs[idx] += c;
        }
        for (g, c) in low.iter().zip(sol.iter()) {
            let idx = all.iter().position(|m| m == g).expect("monomial present");
            coeffs[idx] -= c;
        }
        Polynomial::new(self.dim, degree, coeffs)
    }

    /// Real roots in `(-1, 1)` of a univariate polynomial, by sign scan and bisection.
    pub fn roots_in_unit_interval(&self) -> Vec<f64> {
        debug_assert_eq!(self.dim, 1);
        let scan = 64 * (self.degree + 1);
        let f = |x: f64| self.eval(&Point::scalar(x));
        let mut roots = Vec::new();
        let mut x0 = -1.0;
        let mut f0 = f(x0);
        for i in 1..=scan {
            let x1 = -1.0 + 2.0 * i as f64 / scan as f64;
            let f1 = f(x1);
            if f0 == 0.0 && i > 1 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut a, mut b, mut fa) = (x0, x1, f0);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(2, 2), vec![[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]);
    }

    #[test]
    fn disc_moments_match_polar_quadrature() {
        for beta in [[0, 0], [2, 0], [2, 2], [4, 2], [1, 2], [6, 0]] {
            // ∫_0^1 ρ^{a+b+1} dρ ∫_0^{2π} cos^a sin^b dθ, θ by a fine periodic rule
            let n = 400;
            let ang: f64 = (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    t.cos().powi(beta[0] as i32) * t.sin().powi(beta[1] as i32)
                })
                .sum::<f64>()
                * 2.0
                * PI
                / n as f64;
            let oracle = ang / (beta[0] + beta[1] + 2) as f64;
            assert!((unit_ball_moment(2, beta) - oracle).abs() < 1e-12, "{beta:?}");
        }
        assert!((unit_ball_moment(2, [0, 0]) - PI).abs() < 1e-15);
    }

    #[test]
    fn projection_kills_low_moments_and_is_idempotent() {
        for dim in [1, 2] {
            let n = monomials(dim, 3).len();
            let coeffs: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 1.7).collect();
            let p = Polynomial::new(dim, 3, coeffs).unwrap();
            let q = p.project_out_low_degree(1).unwrap();
            for beta in monomials(dim, 1) {
                assert!(q.unit_moment(beta).abs() < 1e-13, "{dim} {beta:?}");
            }
            let qq = q.project_out_low_degree(1).unwrap();
            let scale = q.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            for (a, b) in q.coeffs.iter().zip(&qq.coeffs) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn horner_matches_monomial_sum() {
        let p = Polynomial::new(1, 3, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let x = 0.37;
        assert!((p.eval(&Point::scalar(x)) - (1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x * x * x)).abs() < 1e-15);
        let roots = Polynomial::new(1, 2, vec![-0.25, 0.0, 1.0]).unwrap().roots_in_unit_interval();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 0.5).abs() < 1e-12 && (roots[1] - 0.5).abs() < 1e-12);
    }
}
