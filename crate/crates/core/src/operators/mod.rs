//! The generalized Riesz potential `T_{α,m}`, its Riesz special case, maximal
//! operators and weighted Lebesgue norms, all by quadrature.

mod function;
mod maximal;

pub use function::{Domain, Profile, SampledFunction};
pub use maximal::{default_t_grid, fractional_maximal, hl_maximal, mphi_maximal_lower, MaximalPolicy, MaximalValue};

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MatrixFamily;
use crate::point::Point;
use crate::quadrature::{integrate_ball, integrate_box, Integrand, QuadratureScheme, Singularity};
use crate::report::ratio;
use crate::weights::{WeightIntegrand, WeightSpec};

/// `α` and the kernel exponents `α_1, ..., α_m` with `Σ α_j = n - α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentProfile {
    pub dim: usize,
    pub alpha: f64,
    pub exponents: Vec<f64>,
}

impl ExponentProfile {
    pub fn new(dim: usize, alpha: f64, exponents: Vec<f64>) -> Result<Self> {
        let e = ExponentProfile { dim, alpha, exponents };
        e.validate()?;
        Ok(e)
    }

    /// `α_j = (n - α) / m` for all `j`.
    pub fn equal_split(dim: usize, alpha: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "at least one exponent is required"));
        }
        Self::new(dim, alpha, vec![(dim as f64 - alpha) / m as f64; m])
    }

    /// The Riesz potential `I_α`: one exponent `n - α`.
    pub fn riesz(dim: usize, alpha: f64) -> Result<Self> {
        Self::equal_split(dim, alpha, 1)
    }

    pub fn validate(&self) -> Result<()> {
        crate::point::check_dim(self.dim)?;
        let n = self.dim as f64;
        if !(self.alpha >= 0.0 && self.alpha < n) {
            return Err(Error::invalid("alpha", format!("must lie in [0, {n}), got {}", self.alpha)));
        }
        if self.exponents.is_empty() {
            return Err(Error::invalid("exponents", "at least one exponent is required"));
        }
        if self.exponents.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid("exponents", "all exponents must be positive"));
        }
        let sum: f64 = self.exponents.iter().sum();
        if (sum - (n - self.alpha)).abs() > 1e-12 {
            return Err(Error::invalid(
                "exponents",
                format!("must sum to n - alpha = {}, got {sum}", n - self.alpha),
            ));
        }
        // m > 1 - α/n: automatic for m >= 1 once α >= 0
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.exponents.len()
    }
}

fn check_family(profile: &ExponentProfile, family: &MatrixFamily) -> Result<()> {
    if profile.m() != family.len() {
        return Err(Error::invalid(
            "exponents",
            format!("{} exponents for {} matrices", profile.m(), family.len()),
        ));
    }
    if profile.dim != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: profile.dim,
            found: family.dim(),
        });
    }
    Ok(())
}

/// `prod_j |x - A_j y|^{-α_j}`.
pub fn kernel_eval(x: &Point, y: &Point, profile: &ExponentProfile, family: &MatrixFamily) -> Result<f64> {
    check_family(profile, family)?;
    let mut v = 1.0;
    for (a, e) in family.matrices().iter().zip(&profile.exponents) {
        let d = x.dist(&a.apply(y));
        if d < 1e-14 {
            return Err(Error::Singular {
                x: x.to_vec(),
                y: y.to_vec(),
            });
        }
        v *= d.powf(-e);
    }
    Ok(v)
}

struct Group {
    center: Point,
    members: Vec<usize>,
}

/// `density(y) k(x, y)` with the kernel poles `y = A_j^{-1} x` declared as
/// power singularities (coincident poles merged).
struct KernelIntegrand<'a, G> {
    x: Point,
    profile: &'a ExponentProfile,
    family: &'a MatrixFamily,
    density: G,
    groups: Vec<Group>,
}

impl<'a, G: Fn(&Point) -> f64 + Sync> KernelIntegrand<'a, G> {
    fn new(x: Point, profile: &'a ExponentProfile, family: &'a MatrixFamily, density: G) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        for j in 0..family.len() {
            let c = family.inverse(j).apply(&x);
            let tol = 1e-12 * (1.0 + c.norm());
            match groups.iter_mut().find(|g| g.center.dist(&c) <= tol) {
                Some(g) => g.members.push(j),
                None => groups.push(Group {
                    center: c,
                    members: vec![j],
                }),
            }
        }
        KernelIntegrand {
            x,
            profile,
            family,
            density,
            groups,
        }
    }
}

impl<G: Fn(&Point) -> f64 + Sync> Integrand for KernelIntegrand<'_, G> {
    fn dim(&self) -> usize {
        self.profile.dim
    }

    fn value(&self, y: &Point) -> f64 {
        let d = (self.density)(y);
        if d == 0.0 {
            return 0.0;
        }
        let mut v = d;
        for (a, e) in self.family.matrices().iter().zip(&self.profile.exponents) {
            v *= self.x.dist(&a.apply(y)).powf(-e);
        }
        v
    }

    fn singularities(&self) -> Vec<Singularity> {
        self.groups
            .iter()
            .map(|g| Singularity::Power {
                center: g.center,
                exponent: -g.members.iter().map(|&j| self.profile.exponents[j]).sum::<f64>(),
            })
            .collect()
    }

    fn regular_part(&self, k: usize, y: &Point) -> f64 {
        let d = (self.density)(y);
        if d == 0.0 {
            return 0.0;
        }
        let g = &self.groups[k];
        let v = y.sub(&g.center);
        let r = v.norm();
        let mut out = d;
        for (j, (a, e)) in self.family.matrices().iter().zip(&self.profile.exponents).enumerate() {
            if g.members.contains(&j) {
                // |x - A_j y| = |A_j (c - y)|; keep only the direction factor
                out *= (a.apply(&v).norm() / r).powf(-e);
            } else {
                out *= self.x.dist(&a.apply(y)).powf(-e);
            }
        }
        out
    }
}

/// Wraps an integrand in a bounded factor that shares its singular structure.
struct Scaled<'a, I, G> {
    inner: &'a I,
    factor: G,
}

impl<I: Integrand, G: Fn(&Point) -> f64 + Sync> Integrand for Scaled<'_, I, G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, y: &Point) -> f64 {
        let g = (self.factor)(y);
        if g == 0.0 {
            0.0
        } else {
            g * self.inner.value(y)
        }
    }
    fn singularities(&self) -> Vec<Singularity> {
        self.inner.singularities()
    }
    fn regular_part(&self, k: usize, y: &Point) -> f64 {
        let g = (self.factor)(y);
        if g == 0.0 {
            0.0
        } else {
            g * self.inner.regular_part(k, y)
        }
    }
}

pub(crate) fn integrate_domain<I: Integrand>(f: &I, domain: &Domain, scheme: &QuadratureScheme) -> Result<f64> {
    match domain {
        Domain::Ball(b) => integrate_ball(f, b, scheme),
        Domain::Box { lo, hi, cells } => {
            let dim = lo.dim();
            let mut counts = [1usize, 1];
            for i in 0..dim {
                let per = (2 * scheme.resolution).div_ceil(cells[i]).max(1);
                counts[i] = cells[i] * per;
            }
            integrate_box(f, lo, hi, counts, scheme)
        }
    }
}

fn potential<G: Fn(&Point) -> f64 + Sync>(
    density: G,
    domain: &Domain,
    x: &Point,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    check_family(profile, family)?;
    if x.dim() != profile.dim {
        return Err(Error::DimensionMismatch {
            expected: profile.dim,
            found: x.dim(),
        });
    }
    integrate_domain(&KernelIntegrand::new(*x, profile, family, density), domain, scheme)
}

/// `T_{α,m} f(x)` at the scheme's resolution, without a refinement check.
pub fn apply_t_at(
    f: &SampledFunction,
    x: &Point,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    potential(|y| f.eval(y), &f.domain(), x, profile, family, scheme)
}

/// `T_{α,m} f(x)`, compared against a run at twice the resolution; the finer
/// value is returned. Fails when the two differ by more than `8 tol max(1, |T f|)`.
pub fn apply_t(
    f: &SampledFunction,
    x: &Point,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    scheme.validate()?;
    let coarse = apply_t_at(f, x, profile, family, scheme)?;
    let fine = apply_t_at(f, x, profile, family, &scheme.refined(2))?;
    let limit = 8.0 * scheme.tolerance * fine.abs().max(1.0);
    if (coarse - fine).abs() > limit {
        return Err(Error::QuadratureDiverged { coarse, fine, limit });
    }
    Ok(fine)
}

/// `I_α f(x) = ∫ |x - y|^{α - n} f(y) dy`.
pub fn riesz_potential(f: &SampledFunction, x: &Point, alpha: f64, scheme: &QuadratureScheme) -> Result<f64> {
    let profile = ExponentProfile::riesz(f.dim(), alpha)?;
    apply_t(f, x, &profile, &MatrixFamily::identity(f.dim()), scheme)
}

fn riesz_abs_at(f: &SampledFunction, x: &Point, alpha: f64, scheme: &QuadratureScheme) -> Result<f64> {
    let profile = ExponentProfile::riesz(f.dim(), alpha)?;
    potential(|y| f.eval(y).abs(), &f.domain(), x, &profile, &MatrixFamily::identity(f.dim()), scheme)
}

/// `|T f(x)| / Σ_j I_α(|f|)(A_j^{-1} x)`, with `0/0 = 0`.
pub fn domination_check(
    f: &SampledFunction,
    x: &Point,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let n = profile.dim as f64;
    if !(profile.alpha > 0.0 && profile.alpha < n) {
        return Err(Error::invalid("alpha", "domination needs 0 < alpha < n"));
    }
    let lhs = apply_t_at(f, x, profile, family, scheme)?.abs();
    let mut rhs = 0.0;
    for j in 0..family.len() {
        rhs += riesz_abs_at(f, &family.inverse(j).apply(x), profile.alpha, scheme)?;
    }
    Ok(ratio(lhs, rhs))
}

/// `(∫ |f|^p w^s)^{1/p}`.
pub fn weighted_norm(f: &SampledFunction, p: f64, w: &WeightSpec, s: f64, scheme: &QuadratureScheme) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid("p", "must be positive and finite"));
    }
    if w.dim != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: w.dim,
        });
    }
    let ws = w.powered(s);
    let base = WeightIntegrand::new(&ws);
    let integrand = Scaled {
        inner: &base,
        factor: |y: &Point| f.eval(y).abs().powf(p),
    };
    Ok(integrate_domain(&integrand, &f.domain(), scheme)?.powf(1.0 / p))
}

/// Evaluates `g` at every point in parallel, keeping input order.
pub fn sweep<G>(points: &[Point], g: G) -> Result<Vec<f64>>
where
    G: Fn(&Point) -> Result<f64> + Sync + Send,
{
    points.par_iter().map(g).collect()
}

/// Writes `(x..., value)` rows with a header.
pub fn write_sweep_csv(path: &Path, points: &[Point], values: &[f64]) -> Result<()> {
    write_sweep(std::fs::File::create(path)?, points, values)
}

/// Same rows to an arbitrary writer.
pub fn write_sweep<W: Write>(writer: W, points: &[Point], values: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let dim = points.first().map_or(1, Point::dim);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    out.write_record(&header)?;
    for (p, v) in points.iter().zip(values) {
        let mut row: Vec<String> = p.coords().iter().map(|c| format!("{c:.17e}")).collect();
        row.push(format!("{v:.17e}"));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
