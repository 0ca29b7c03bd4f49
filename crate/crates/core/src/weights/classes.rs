use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BallFamily, WeightSpec};
use crate::error::{Error, Result};
use crate::geometry::MatrixFamily;
use crate::point::{Ball, Point};
use crate::quadrature::QuadratureScheme;

/// Family refinements beyond the base level used for divergence verdicts.
pub const REFINEMENT_LEVELS: u32 = 3;
/// Growth across the refinements that counts as blow-up.
pub const DIVERGENCE_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum WeightClass {
    A1,
    Ap { p: f64 },
    Apq { p: f64, q: f64 },
    Rh { s: f64 },
}

impl WeightClass {
    fn validate(&self) -> Result<()> {
        match *self {
            WeightClass::A1 => Ok(()),
            WeightClass::Ap { p } if p.is_finite() && p >= 1.0 => Ok(()),
            WeightClass::Ap { .. } => Err(Error::invalid("p", "A_p needs 1 <= p < inf")),
            WeightClass::Apq { p, q } if p.is_finite() && q.is_finite() && p >= 1.0 && q >= p => Ok(()),
            WeightClass::Apq { .. } => Err(Error::invalid("q", "A_{p,q} needs 1 <= p <= q < inf")),
            WeightClass::Rh { s } if s.is_finite() && s > 1.0 => Ok(()),
            WeightClass::Rh { .. } => Err(Error::invalid("s", "RH_s needs 1 < s < inf")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Diverging,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightClassReport {
    #[serde(flatten)]
    pub class: WeightClass,
    /// Largest ball constant seen over all refinement levels.
    #[serde(with = "crate::report::ext_f64")]
    pub constant: f64,
    pub verdict: Verdict,
    /// Number of balls in the base family.
    pub balls: usize,
    /// Constant per refinement level.
    #[serde(with = "crate::report::ext_f64_vec")]
    pub series: Vec<f64>,
    pub witness: Option<Ball>,
}

impl WeightClassReport {
    pub fn is_finite(&self) -> bool {
        self.verdict == Verdict::Finite
    }
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn quotient(num: f64, den: f64) -> f64 {
    if !num.is_finite() || den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Constant of `class` on one ball.
pub(crate) fn ball_constant(w: &WeightSpec, class: WeightClass, ball: &Ball, q: &QuadratureScheme) -> Result<f64> {
    let mean = |s: f64| w.power_mean(s, ball, q);
    Ok(match class {
        WeightClass::A1 | WeightClass::Ap { p: 1.0 } => quotient(mean(1.0)?, w.ess_inf(ball, q)?),
        WeightClass::Ap { p } => quotient(mean(1.0)?, mean(-1.0 / (p - 1.0))?),
        WeightClass::Apq { p: 1.0, q: qq } => quotient(mean(qq)?, w.ess_inf(ball, q)?),
        WeightClass::Apq { p, q: qq } => quotient(mean(qq)?, mean(-conjugate(p))?),
        WeightClass::Rh { s } => {
            let m1 = mean(1.0)?;
            if !m1.is_finite() {
                f64::INFINITY
            } else {
                quotient(mean(s)?, m1)
            }
        }
    })
}

/// Deterministic sup of a per-ball quantity (first maximiser wins).
pub(crate) fn sup_over(
    balls: &[Ball],
    f: impl Fn(&Ball) -> Result<f64> + Sync,
) -> Result<(f64, Option<Ball>)> {
    let values: Vec<f64> = balls.par_iter().map(&f).collect::<Result<_>>()?;
    let mut best = (f64::NEG_INFINITY, None);
    for (b, v) in balls.iter().zip(values) {
        if v > best.0 || (v.is_nan() && best.1.is_none()) {
            best = (v, Some(*b));
        }
    }
    Ok(best)
}

fn level_scheme(scheme: &QuadratureScheme, dim: usize, level: u32) -> QuadratureScheme {
    // plane families are refined in radius only; cell counts grow quadratically
    if dim == 1 {
        scheme.refined(1 << level)
    } else {
        *scheme
    }
}

/// Estimates the constant of `class` over `family`, then over `REFINEMENT_LEVELS`
/// refinements (radii one octave smaller and, in n = 1, twice the resolution
/// per level). Diverging means some level is infinite, or the series never
/// decreases and grows by at least `DIVERGENCE_FACTOR`.
pub fn estimate_class(
    w: &WeightSpec,
    class: WeightClass,
    family: &BallFamily,
    scheme: &QuadratureScheme,
) -> Result<WeightClassReport> {
    class.validate()?;
    scheme.validate()?;
    if family.dim != w.dim {
        return Err(Error::DimensionMismatch {
            expected: w.dim,
            found: family.dim,
        });
    }
    let mut series = Vec::new();
    let mut witness = None;
    let mut constant = f64::NEG_INFINITY;
    for level in 0..=REFINEMENT_LEVELS {
        let fam = family.refine(level)?;
        let q = level_scheme(scheme, w.dim, level);
        let (c, b) = sup_over(fam.balls(), |ball| ball_constant(w, class, ball, &q))?;
        series.push(c);
        if c > constant || witness.is_none() {
            constant = c;
            witness = b;
        }
        if !c.is_finite() {
            break;
        }
    }
    let any_infinite = series.iter().any(|c| !c.is_finite());
    let monotone = series.windows(2).all(|p| p[1] >= p[0]);
    let growth = series.last().copied().unwrap_or(1.0) / series[0];
    let verdict = if any_infinite || (monotone && growth >= DIVERGENCE_FACTOR) {
        Verdict::Diverging
    } else {
        Verdict::Finite
    };
    Ok(WeightClassReport {
        class,
        constant,
        verdict,
        balls: family.len(),
        series,
        witness,
    })
}

pub fn estimate_a1_constant(w: &WeightSpec, family: &BallFamily, q: &QuadratureScheme) -> Result<WeightClassReport> {
    estimate_class(w, WeightClass::A1, family, q)
}

pub fn estimate_ap_constant(
    w: &WeightSpec,
    p: f64,
    family: &BallFamily,
    q: &QuadratureScheme,
) -> Result<WeightClassReport> {
    estimate_class(w, WeightClass::Ap { p }, family, q)
}

pub fn estimate_apq_constant(
    w: &WeightSpec,
    p: f64,
    qq: f64,
    family: &BallFamily,
    q: &QuadratureScheme,
) -> Result<WeightClassReport> {
    estimate_class(w, WeightClass::Apq { p, q: qq }, family, q)
}

pub fn estimate_rh_constant(
    w: &WeightSpec,
    s: f64,
    family: &BallFamily,
    q: &QuadratureScheme,
) -> Result<WeightClassReport> {
    estimate_class(w, WeightClass::Rh { s }, family, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    #[serde(with = "crate::report::ext_f64")]
    pub lo: f64,
    #[serde(with = "crate::report::ext_f64")]
    pub hi: f64,
}

impl Bracket {
    /// Midpoint, or `inf` for an unbounded bracket.
    pub fn estimate(&self) -> f64 {
        if self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else {
            f64::INFINITY
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticalIndexOptions {
    pub tol: f64,
    /// Largest exponent probed before an index is reported as `inf`.
    pub cap: f64,
}

impl Default for CriticalIndexOptions {
    fn default() -> Self {
        CriticalIndexOptions { tol: 1e-2, cap: 1024.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalIndices {
    /// `inf { q : w in A_q }`
    pub q_tilde: Bracket,
    /// `sup { r : w in RH_r }`
    pub r_w: Bracket,
}

impl CriticalIndices {
    /// Upper end of the `q̃_w` bracket (the safe side for degree bounds).
    pub fn q_tilde_upper(&self) -> f64 {
        self.q_tilde.hi
    }

    /// Lower end of the `r_w` bracket (the safe side for `r_w / (r_w - 1)`).
    pub fn r_w_lower(&self) -> f64 {
        self.r_w.lo
    }

    /// `r_w / (r_w - 1)` from the lower bracket end, `1` when `r_w = inf`.
    pub fn r_w_conjugate(&self) -> f64 {
        if self.r_w.hi.is_infinite() {
            1.0
        } else {
            let r = self.r_w_lower();
            if r <= 1.0 {
                f64::INFINITY
            } else {
                r / (r - 1.0)
            }
        }
    }
}

/// Bisection for the threshold of a monotone predicate: `holds(x)` is true for
/// `x >= t` (`upward`) or for `x <= t` (downward). Returns `[lo, hi]` around `t`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, holds_at_hi: bool, mut holds: impl FnMut(f64) -> Result<bool>) -> Result<Bracket> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? == holds_at_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bracket { lo, hi })
}

pub fn critical_indices(
    w: &WeightSpec,
    family: &BallFamily,
    scheme: &QuadratureScheme,
    options: &CriticalIndexOptions,
) -> Result<CriticalIndices> {
    if !(options.tol > 0.0 && options.cap > 2.0) {
        return Err(Error::invalid("tol", "tolerance must be positive and the cap above 2"));
    }
    let in_ap = |p: f64| -> Result<bool> {
        let class = if p == 1.0 { WeightClass::A1 } else { WeightClass::Ap { p } };
        Ok(estimate_class(w, class, family, scheme)?.is_finite())
    };
    let in_rh = |s: f64| -> Result<bool> { Ok(estimate_class(w, WeightClass::Rh { s }, family, scheme)?.is_finite()) };

    let q_tilde = if in_ap(1.0)? {
        Bracket { lo: 1.0, hi: 1.0 }
    } else {
        let mut lo = 1.0;
        let mut hi = 2.0;
        while hi <= options.cap && !in_ap(hi)? {
            lo = hi;
            hi *= 2.0;
        }
        if hi > options.cap {
            Bracket {
                lo,
                hi: f64::INFINITY,
            }
        } else {
            bisect(lo, hi, options.tol, true, in_ap)?
        }
    };

    let mut lo = 1.0;
    let mut hi = 2.0;
    while hi <= options.cap && in_rh(hi)? {
        lo = hi;
        hi *= 2.0;
    }
    let r_w = if hi > options.cap {
        Bracket {
            lo,
            hi: f64::INFINITY,
        }
    } else {
        // RH_s holds below the threshold: lo passes, hi fails
        bisect(lo, hi, options.tol, false, |s| if s <= 1.0 { Ok(true) } else { in_rh(s) })?
    };
    Ok(CriticalIndices { q_tilde, r_w })
}

/// `max_{j, x} w(A_j x) / w(x)` over the sample.
pub fn check_matrix_compatibility(w: &WeightSpec, family: &MatrixFamily, sample: &[Point]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in sample {
        let base = w.eval(x)?;
        for a in family.matrices() {
            worst = worst.max(w.eval(&a.apply(x))? / base);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub p: f64,
    pub lambda: f64,
    #[serde(with = "crate::report::ext_f64")]
    pub ap_constant: f64,
    /// `max_B w(λB) / w(B)`
    pub worst_ratio: f64,
    /// `λ^{np} [w]_{A_p}`
    #[serde(with = "crate::report::ext_f64")]
    pub bound: f64,
    pub pass: bool,
    pub witness: Option<Ball>,
}

/// Checks `w(λB) <= λ^{np} [w]_{A_p} w(B)` on every ball of the family.
pub fn doubling_check(
    w: &WeightSpec,
    p: f64,
    lambda: f64,
    family: &BallFamily,
    scheme: &QuadratureScheme,
) -> Result<DoublingCheck> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must exceed 1"));
    }
    let class = if p == 1.0 { WeightClass::A1 } else { WeightClass::Ap { p } };
    let report = estimate_class(w, class, family, scheme)?;
    if !report.is_finite() {
        return Err(Error::HypothesisFailed(format!(
            "weight is not in A_{p} on the family (constant {})",
            report.constant
        )));
    }
    let (worst, witness) = sup_over(family.balls(), |b| {
        Ok(w.measure(1.0, &b.dilate(lambda), scheme)? / w.measure(1.0, b, scheme)?)
    })?;
    let bound = lambda.powf(w.dim as f64 * p) * report.constant;
    Ok(DoublingCheck {
        p,
        lambda,
        ap_constant: report.constant,
        worst_ratio: worst,
        bound,
        pass: worst <= bound * (1.0 + 1e-9),
        witness,
    })
}
