//! Weights on R^n: evaluation, weighted measures, Muckenhoupt and
//! reverse-Hölder constant estimates over finite ball families.

mod classes;
mod family;

pub use classes::{
    check_matrix_compatibility, critical_indices, doubling_check, estimate_a1_constant, estimate_ap_constant,
    estimate_apq_constant, estimate_class, estimate_rh_constant, Bracket, CriticalIndexOptions, CriticalIndices,
    DoublingCheck, Verdict, WeightClass, WeightClassReport, DIVERGENCE_FACTOR, REFINEMENT_LEVELS,
};
pub use family::{BallFamily, BallFamilySpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSamples;
use crate::point::{check_dim, Ball, Point};
use crate::quadrature::{ball_nodes, integrate_ball, Integrand, QuadratureScheme, Singularity};

const INV_E: f64 = 1.0 / std::f64::consts::E;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFactor {
    pub exponent: f64,
    pub center: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `|x|^a`
    Power { exponent: f64 },
    /// `log(1/|x|)` for `|x| < 1/e`, `1` otherwise.
    LogExample,
    /// `prod_i |x - c_i|^{a_i}`
    ProductPower { factors: Vec<PowerFactor> },
    /// Multilinear interpolation of positive lattice samples.
    Tabulated { samples: GridSamples },
}

/// `scale * base(x)^power` for one of the base kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(flatten)]
    pub kind: WeightKind,
    pub dim: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub power: f64,
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn new(kind: WeightKind, dim: usize) -> Result<Self> {
        let w = WeightSpec {
            kind,
            dim,
            scale: 1.0,
            power: 1.0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn power_law(dim: usize, exponent: f64) -> Result<Self> {
        Self::new(WeightKind::Power { exponent }, dim)
    }

    pub fn constant(dim: usize) -> Self {
        Self::power_law(dim, 0.0).expect("valid")
    }

    pub fn log_example(dim: usize) -> Result<Self> {
        Self::new(WeightKind::LogExample, dim)
    }

    pub fn product_power(dim: usize, factors: Vec<PowerFactor>) -> Result<Self> {
        Self::new(WeightKind::ProductPower { factors }, dim)
    }

    pub fn tabulated(samples: GridSamples) -> Result<Self> {
        let dim = samples.grid.dim();
        Self::new(WeightKind::Tabulated { samples }, dim)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        let n = self.dim as f64;
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid("scale", "must be finite and positive"));
        }
        if !(self.power.is_finite() && self.power != 0.0) {
            return Err(Error::invalid("power", "must be finite and non-zero"));
        }
        match &self.kind {
            WeightKind::Power { exponent } => {
                if !exponent.is_finite() || exponent * self.power <= -n {
                    return Err(Error::invalid(
                        "exponent",
                        format!("|x|^a is locally integrable only for a > -{n}, got {}", exponent * self.power),
                    ));
                }
            }
            WeightKind::LogExample => {}
            WeightKind::ProductPower { factors } => {
                if factors.is_empty() {
                    return Err(Error::invalid("factors", "at least one factor is required"));
                }
                for f in factors {
                    if f.center.dim() != self.dim {
                        return Err(Error::DimensionMismatch {
                            expected: self.dim,
                            found: f.center.dim(),
                        });
                    }
                    if !f.exponent.is_finite() || f.exponent * self.power <= -n {
                        return Err(Error::invalid("exponent", format!("factor exponents must exceed -{n}")));
                    }
                }
            }
            WeightKind::Tabulated { samples } => {
                if samples.grid.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: samples.grid.dim(),
                    });
                }
                if samples.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid("values", "tabulated weights must be finite and strictly positive"));
                }
            }
        }
        Ok(())
    }

    /// `w^s`. Power-law kinds fold `s` into their exponents.
    pub fn powered(&self, s: f64) -> WeightSpec {
        let scale = self.scale.powf(s);
        match &self.kind {
            WeightKind::Power { exponent } => WeightSpec {
                kind: WeightKind::Power {
                    exponent: exponent * self.power * s,
                },
                dim: self.dim,
                scale,
                power: 1.0,
            },
            WeightKind::ProductPower { factors } => WeightSpec {
                kind: WeightKind::ProductPower {
                    factors: factors
                        .iter()
                        .map(|f| PowerFactor {
                            exponent: f.exponent * self.power * s,
                            center: f.center,
                        })
                        .collect(),
                },
                dim: self.dim,
                scale,
                power: 1.0,
            },
            _ => WeightSpec {
                kind: self.kind.clone(),
                dim: self.dim,
                scale,
                power: self.power * s,
            },
        }
    }

    /// `c * w`.
    pub fn rescaled(&self, c: f64) -> WeightSpec {
        WeightSpec {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    /// Points where the analytic form has a pole or a zero.
    pub fn singular_centers(&self) -> Vec<Point> {
        match &self.kind {
            WeightKind::Power { exponent } if *exponent != 0.0 => vec![Point::origin(self.dim)],
            WeightKind::LogExample => vec![Point::origin(self.dim)],
            WeightKind::ProductPower { factors } => {
                let mut out: Vec<Point> = Vec::new();
                for f in factors.iter().filter(|f| f.exponent != 0.0) {
                    if !out.iter().any(|c| c.dist(&f.center) < 1e-14) {
                        out.push(f.center);
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Merged `(center, exponent)` pairs of the power-law factors of this weight.
    fn power_factors(&self) -> Vec<(Point, f64)> {
        let raw: Vec<(Point, f64)> = match &self.kind {
            WeightKind::Power { exponent } => vec![(Point::origin(self.dim), exponent * self.power)],
            WeightKind::ProductPower { factors } => {
                factors.iter().map(|f| (f.center, f.exponent * self.power)).collect()
            }
            _ => Vec::new(),
        };
        let mut merged: Vec<(Point, f64)> = Vec::new();
        for (c, e) in raw {
            match merged.iter_mut().find(|(m, _)| m.dist(&c) < 1e-14) {
                Some(slot) => slot.1 += e,
                None => merged.push((c, e)),
            }
        }
        merged.retain(|(_, e)| *e != 0.0);
        merged
    }

    fn base(&self, x: &Point) -> f64 {
        match &self.kind {
            WeightKind::Power { exponent } => {
                if *exponent == 0.0 {
                    1.0
                } else {
                    x.norm().powf(*exponent)
                }
            }
            WeightKind::LogExample => {
                let r = x.norm();
                if r < INV_E {
                    -r.ln()
                } else {
                    1.0
                }
            }
            WeightKind::ProductPower { factors } => factors
                .iter()
                .filter(|f| f.exponent != 0.0)
                .map(|f| x.dist(&f.center).powf(f.exponent))
                .product(),
            WeightKind::Tabulated { samples } => samples.eval(x).unwrap_or(f64::NAN),
        }
    }

    /// `w(x)` without singularity checks; may be `0`, `inf` or `NaN`.
    #[inline]
    pub fn raw(&self, x: &Point) -> f64 {
        let b = self.base(x);
        if self.power == 1.0 {
            self.scale * b
        } else {
            self.scale * b.powf(self.power)
        }
    }

    /// `ln w(x)`, formed without evaluating `w` so extreme powers do not under- or overflow.
    pub fn ln_raw(&self, x: &Point) -> f64 {
        let lb = match &self.kind {
            WeightKind::Power { exponent } if *exponent == 0.0 => 0.0,
            WeightKind::Power { exponent } => exponent * x.norm().ln(),
            WeightKind::ProductPower { factors } => factors
                .iter()
                .filter(|f| f.exponent != 0.0)
                .map(|f| f.exponent * x.dist(&f.center).ln())
                .sum(),
            _ => self.base(x).ln(),
        };
        self.scale.ln() + self.power * lb
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        if let WeightKind::Tabulated { samples } = &self.kind {
            let v = samples.eval(x)?;
            return Ok(self.scale * v.powf(self.power));
        }
        if self.singular_centers().iter().any(|c| c.dist(x) == 0.0) {
            return Err(Error::SingularPoint { point: x.to_vec() });
        }
        let v = self.raw(x);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::SingularPoint { point: x.to_vec() });
        }
        Ok(v)
    }

    /// True if the analytic form vanishes somewhere in the closed ball.
    pub fn vanishes_in(&self, ball: &Ball) -> bool {
        match &self.kind {
            WeightKind::LogExample => self.power < 0.0 && ball.contains(&Point::origin(self.dim)),
            _ => self.power_factors().iter().any(|(c, e)| *e > 0.0 && ball.contains(c)),
        }
    }

    fn check_domain(&self, ball: &Ball) -> Result<()> {
        if ball.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: ball.dim(),
            });
        }
        if let WeightKind::Tabulated { samples } = &self.kind {
            for i in 0..self.dim {
                let c = ball.center.get(i);
                for s in [-1.0, 1.0] {
                    let mut p = ball.center;
                    p.set(i, c + s * ball.radius);
                    if !samples.grid.contains(&p) {
                        return Err(Error::OutOfGrid { point: p.to_vec() });
                    }
                }
            }
        }
        Ok(())
    }

    /// `∫_B w^s`.
    pub fn measure(&self, s: f64, ball: &Ball, scheme: &QuadratureScheme) -> Result<f64> {
        self.check_domain(ball)?;
        let ws = self.powered(s);
        integrate_ball(&WeightIntegrand::new(&ws), ball, scheme)
    }

    /// `(avg_B w^s)^{1/s}`. The integrand is `w^s` divided by its largest node
    /// value, all in log space, so large `|s|` neither overflows nor underflows.
    /// Non-integrable `w^s` yields `inf` for `s > 0` and `0` for `s < 0`.
    pub fn power_mean(&self, s: f64, ball: &Ball, scheme: &QuadratureScheme) -> Result<f64> {
        self.check_domain(ball)?;
        let unit = WeightSpec {
            scale: 1.0,
            ..self.clone()
        }
        .powered(s);
        let mut probes = ball_nodes(ball, scheme);
        if matches!(self.kind, WeightKind::LogExample) && ball.contains(&Point::origin(self.dim)) {
            // the graded rule reaches far closer to the pole than any node
            let dir = match self.dim {
                1 => Point::scalar(1.0),
                _ => Point::planar(1.0, 0.0),
            };
            probes.extend((0..=60).map(|k| dir.scale(ball.radius * 0.5f64.powi(k))));
        }
        let shift = probes
            .iter()
            .map(|x| unit.ln_raw(x))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        match integrate_ball(&WeightIntegrand::shifted(&unit, shift), ball, scheme) {
            Ok(m) => Ok(self.scale * (((m / ball.volume()).ln() + shift) / s).exp()),
            Err(Error::NotIntegrable { .. }) | Err(Error::NonFinite) => Ok(if s > 0.0 { f64::INFINITY } else { 0.0 }),
            Err(e) => Err(e),
        }
    }

    /// Essential infimum surrogate: minimum over quadrature nodes and boundary
    /// points, or `0` when the analytic form vanishes in the ball.
    pub fn ess_inf(&self, ball: &Ball, scheme: &QuadratureScheme) -> Result<f64> {
        self.check_domain(ball)?;
        if self.vanishes_in(ball) {
            return Ok(0.0);
        }
        let mut pts = ball_nodes(ball, scheme);
        match self.dim {
            1 => {
                pts.push(ball.center.offset(&Point::scalar(1.0), -ball.radius));
                pts.push(ball.center.offset(&Point::scalar(1.0), ball.radius));
            }
            _ => {
                for k in 0..32 {
                    let t = std::f64::consts::TAU * k as f64 / 32.0;
                    pts.push(ball.center.offset(&Point::planar(t.cos(), t.sin()), ball.radius));
                }
            }
        }
        let mut min = f64::INFINITY;
        for p in &pts {
            let v = self.raw(p);
            if v.is_nan() {
                return Err(Error::SingularPoint { point: p.to_vec() });
            }
            min = min.min(v);
        }
        Ok(min)
    }
}

/// `w` as a quadrature integrand with its power-law or logarithmic singularities declared.
pub struct WeightIntegrand<'a> {
    w: &'a WeightSpec,
    factors: Vec<(Point, f64)>,
    /// Integrates `w e^{-shift}` when non-zero.
    shift: f64,
}

impl<'a> WeightIntegrand<'a> {
    pub fn new(w: &'a WeightSpec) -> Self {
        Self::shifted(w, 0.0)
    }

    pub fn shifted(w: &'a WeightSpec, shift: f64) -> Self {
        WeightIntegrand {
            factors: w.power_factors(),
            w,
            shift,
        }
    }
}

impl Integrand for WeightIntegrand<'_> {
    fn dim(&self) -> usize {
        self.w.dim
    }

    fn value(&self, y: &Point) -> f64 {
        if self.shift == 0.0 {
            self.w.raw(y)
        } else {
            (self.w.ln_raw(y) - self.shift).exp()
        }
    }

    fn singularities(&self) -> Vec<Singularity> {
        match self.w.kind {
            WeightKind::LogExample => vec![Singularity::Graded {
                center: Point::origin(self.w.dim),
            }],
            _ => self
                .factors
                .iter()
                .map(|(c, e)| Singularity::Power {
                    center: *c,
                    exponent: *e,
                })
                .collect(),
        }
    }

    fn regular_part(&self, k: usize, y: &Point) -> f64 {
        let mut v = self.w.scale.ln() - self.shift;
        for (i, (c, e)) in self.factors.iter().enumerate() {
            if i != k {
                v += e * y.dist(c).ln();
            }
        }
        v.exp()
    }
}
