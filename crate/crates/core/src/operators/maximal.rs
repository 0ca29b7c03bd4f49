//! Maximal operators over finite candidate ball sets. Every value is a lower
//! bound for the true supremum.

use serde::{Deserialize, Serialize};

use super::{integrate_domain, Domain, Profile, SampledFunction};
use crate::error::{Error, Result};
use crate::point::{Ball, Point};
use crate::quadrature::{gauss_panels, integrate_ball, CellRule, FnIntegrand, QuadratureScheme, SingularityPolicy};

/// Candidate set controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximalPolicy {
    /// Lattice points per unit length (1-D endpoints, 2-D centers).
    pub cells_per_unit: usize,
    /// 1-D: the lattice is coarsened so it never exceeds this many points.
    pub max_points: usize,
    /// Extra endpoints spread evenly across the support.
    pub support_cells: usize,
    /// 2-D: candidate radii per center.
    pub radii: usize,
    /// 2-D: quadrature resolution for each candidate ball.
    pub resolution: usize,
}

impl Default for MaximalPolicy {
    fn default() -> Self {
        MaximalPolicy {
            cells_per_unit: 64,
            max_points: 1024,
            support_cells: 64,
            radii: 12,
            resolution: 16,
        }
    }
}

impl MaximalPolicy {
    pub fn refined(&self) -> Self {
        MaximalPolicy {
            cells_per_unit: 2 * self.cells_per_unit,
            max_points: 2 * self.max_points,
            support_cells: 2 * self.support_cells,
            radii: 2 * self.radii,
            resolution: 2 * self.resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells_per_unit == 0 || self.max_points == 0 || self.support_cells == 0 || self.radii == 0 || self.resolution < 16 {
            return Err(Error::invalid("policy", "lattice sizes must be positive, resolution >= 16"));
        }
        Ok(())
    }
}

/// Best candidate value and the ball that attains it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    pub witness: Option<Ball>,
}

impl MaximalValue {
    fn zero() -> Self {
        MaximalValue {
            value: 0.0,
            witness: None,
        }
    }
}

/// Uncentered Hardy-Littlewood maximal function `sup_{B ∋ x} avg_B |f|`.
pub fn hl_maximal(f: &SampledFunction, x: &Point, policy: &MaximalPolicy) -> Result<MaximalValue> {
    search(f, x, 0.0, policy)
}

/// `sup_{B ∋ x} |B|^{β/n - 1} ∫_B |f|` for `0 < β < n`.
pub fn fractional_maximal(f: &SampledFunction, x: &Point, beta: f64, policy: &MaximalPolicy) -> Result<MaximalValue> {
    let n = f.dim() as f64;
    if !(beta > 0.0 && beta < n) {
        return Err(Error::invalid("beta", format!("must lie in (0, {n}), got {beta}")));
    }
    search(f, x, beta, policy)
}

fn search(f: &SampledFunction, x: &Point, beta: f64, policy: &MaximalPolicy) -> Result<MaximalValue> {
    policy.validate()?;
    if x.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: x.dim(),
        });
    }
    match f.dim() {
        1 => Ok(search_1d(f, x.get(0), beta, policy)),
        _ => search_2d(f, x, beta, policy),
    }
}

/// Endpoints: the lattice over the hull of `supp f ∪ {x}` (coarsened for
/// far-away `x`), a subdivision of
/// the support, profile breakpoints and `x` itself. An optimal interval never
/// reaches past that hull, so the search is exhaustive over these endpoints.
fn endpoints_1d(f: &SampledFunction, x: f64, policy: &MaximalPolicy) -> Vec<f64> {
    let (a, b) = f.interval();
    let lo = a.min(x);
    let hi = b.max(x);
    let h = (1.0 / policy.cells_per_unit as f64).max((hi - lo) / policy.max_points as f64);
    let mut pts: Vec<f64> = ((lo / h).ceil() as i64..=(hi / h).floor() as i64)
        .map(|k| k as f64 * h)
        .collect();
    let s = policy.support_cells;
    pts.extend((0..=s).map(|k| a + (b - a) * k as f64 / s as f64));
    pts.extend(f.breakpoints().into_iter().filter(|t| (a..=b).contains(t)));
    if let Profile::Polynomial(p) = &f.profile {
        let (c, r) = (f.support.center.get(0), f.support.radius);
        pts.extend(p.roots_in_unit_interval().into_iter().map(|u| c + r * u));
    }
    pts.push(x);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * (1.0 + q.abs()));
    pts
}

fn search_1d(f: &SampledFunction, x: f64, beta: f64, policy: &MaximalPolicy) -> MaximalValue {
    let pts = endpoints_1d(f, x, policy);
    // |f| is smooth between consecutive endpoints
    let mut prefix = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        let m = gauss_panels(pts[i - 1], pts[i], 1, 8, |t| f.eval(&Point::scalar(t)).abs());
        prefix[i] = prefix[i - 1] + m;
    }
    let split = pts.partition_point(|&t| t < x);
    let mut best = MaximalValue::zero();
    for i in 0..=split.min(pts.len() - 1) {
        if pts[i] > x {
            break;
        }
        for j in split..pts.len() {
            let len = pts[j] - pts[i];
            if len <= 0.0 {
                continue;
            }
            let v = (prefix[j] - prefix[i]) * len.powf(beta - 1.0);
            if v > best.value {
                best = MaximalValue {
                    value: v,
                    witness: Ball::interval(pts[i], pts[j]).ok(),
                };
            }
        }
    }
    best
}

fn search_2d(f: &SampledFunction, x: &Point, beta: f64, policy: &MaximalPolicy) -> Result<MaximalValue> {
    let scheme = QuadratureScheme::new(
        policy.resolution,
        CellRule::GaussLegendre(2),
        SingularityPolicy::AnalyticCell,
        1e-6,
    )?;
    let support = match f.domain() {
        Domain::Ball(b) => b,
        Domain::Box { .. } => f.support,
    };
    let absf = FnIntegrand::new(2, |y: &Point| f.eval(y).abs());
    // hull of supp f ∪ {x}, as a box
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for i in 0..2 {
        lo[i] = (support.center.get(i) - support.radius).min(x.get(i));
        hi[i] = (support.center.get(i) + support.radius).max(x.get(i));
    }
    let diam = Point::planar(hi[0] - lo[0], hi[1] - lo[1]).norm();
    let h = (1.0 / policy.cells_per_unit as f64).max(diam / 16.0);
    let mut centers = vec![*x, support.center];
    for i in 0..=((hi[0] - lo[0]) / h).floor() as usize {
        for j in 0..=((hi[1] - lo[1]) / h).floor() as usize {
            centers.push(Point::planar(lo[0] + i as f64 * h, lo[1] + j as f64 * h));
        }
    }
    let mut balls = Vec::new();
    if support.contains(x) {
        balls.push(support);
    }
    for c in &centers {
        let d = c.dist(x);
        let reach = c.dist(&support.center) + support.radius;
        let top = reach.max(d) * 1.0001;
        let base = d.max(support.radius / policy.support_cells as f64);
        for k in 0..=policy.radii {
            let r = base + (top - base) * k as f64 / policy.radii as f64;
            if r > 0.0 && c.dist(x) <= r {
                balls.push(Ball::new(*c, r)?);
            }
        }
    }
    let n = 2.0;
    let mut best = MaximalValue::zero();
    for b in balls {
        if b.center.dist(&support.center) >= b.radius + support.radius {
            continue;
        }
        let v = integrate_ball(&absf, &b, &scheme)? * b.volume().powf(beta / n - 1.0);
        if v > best.value {
            best = MaximalValue {
                value: v,
                witness: Some(b),
            };
        }
    }
    Ok(best)
}

/// Dyadic scales `2^k`, `-6 <= k <= 6`.
pub fn default_t_grid() -> Vec<f64> {
    (-6..=6).map(|k| 2f64.powi(k)).collect()
}

/// `max_t |(φ_t * Σ f_i)(x)|` with `φ` the standard Gaussian; a lower bound
/// for the smooth maximal function of a finite sum.
pub fn mphi_maximal_lower(
    terms: &[SampledFunction],
    x: &Point,
    ts: &[f64],
    scheme: &QuadratureScheme,
) -> Result<MaximalValue> {
    scheme.validate()?;
    let mut best = MaximalValue::zero();
    for &t in ts {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", "scales must be positive"));
        }
        let mut total = 0.0;
        for f in terms {
            if x.dim() != f.dim() {
                return Err(Error::DimensionMismatch {
                    expected: f.dim(),
                    found: x.dim(),
                });
            }
            let n = f.dim() as i32;
            let norm = (2.0 * std::f64::consts::PI).powf(-0.5 * n as f64) * t.powi(-n);
            let g = FnIntegrand::new(f.dim(), |y: &Point| {
                let v = f.eval(y);
                if v == 0.0 {
                    return 0.0;
                }
                let z = x.dist(y) / t;
                norm * (-0.5 * z * z).exp() * v
            });
            // beyond 8t the Gaussian is below e^{-32}
            let reach = 8.0 * t;
            let far = x.dist(&f.support.center) - f.support.radius;
            if far >= reach {
                continue;
            }
            let domain = if reach < f.support.radius {
                Domain::Ball(Ball::new(*x, reach)?)
            } else {
                f.domain()
            };
            total += integrate_domain(&g, &domain, scheme)?;
        }
        if total.abs() > best.value {
            best = MaximalValue {
                value: total.abs(),
                witness: Some(Ball::new(*x, t)?),
            };
        }
    }
    Ok(best)
}
