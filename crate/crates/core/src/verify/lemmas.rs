use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{outcome, require, AuditItem, Details, Provenance, VerificationReport, DRIFT_LIMIT};
use crate::error::{Error, Result};
use crate::geometry::{classify, MatrixFamily, RegionLabel};
use crate::point::{Ball, Point};
use crate::quadrature::QuadratureScheme;
use crate::weights::{
    critical_indices, estimate_a1_constant, estimate_rh_constant, BallFamily, Bracket, CriticalIndexOptions, WeightSpec,
};

/// Slack below zero tolerated as quadrature noise when an inequality is tight.
const SLACK_TOLERANCE: f64 = 1e-9;

/// `q` with `1/q = 1/p - α/n`; `α = 0` gives `q = p`.
pub fn sobolev_exponent(dim: usize, p: f64, alpha: f64) -> Result<f64> {
    let n = dim as f64;
    if !(alpha >= 0.0 && alpha < n) {
        return Err(Error::invalid("alpha", format!("must lie in [0, {n}), got {alpha}")));
    }
    if !(p > 0.0 && p * alpha < n) {
        return Err(Error::invalid("p", format!("need 0 < p < n / alpha, got {p}")));
    }
    Ok(1.0 / (1.0 / p - alpha / n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentDetails {
    pub pairs: usize,
    /// `min |x - A_i ξ| / |x - A_i x0|` over pairs and `i`.
    #[serde(with = "crate::report::ext_f64")]
    pub min_ratio: f64,
    pub worst_x: Option<Point>,
    pub worst_xi: Option<Point>,
}

/// `|x - A_i ξ| >= |x - A_i x0| / 2` for every `ξ ∈ B`, outer `x` and every `i`.
pub fn check_containment_step(ball: &Ball, family: &MatrixFamily, xis: &[Point], xs: &[Point]) -> Result<VerificationReport> {
    for x in xs {
        if let RegionLabel::Inside(i) = classify(x, ball, family) {
            return Err(Error::MisclassifiedSample {
                point: x.to_vec(),
                ball: i,
            });
        }
    }
    if let Some(xi) = xis.iter().find(|xi| !ball.contains(xi)) {
        return Err(Error::invalid("xi", format!("{:?} is not in the ball", xi.to_vec())));
    }
    let mut d = ContainmentDetails {
        pairs: xis.len() * xs.len(),
        min_ratio: f64::INFINITY,
        worst_x: None,
        worst_xi: None,
    };
    for x in xs {
        for xi in xis {
            for a in family.matrices() {
                let r = x.dist(&a.apply(xi)) / x.dist(&a.apply(&ball.center));
                if r < d.min_ratio {
                    d.min_ratio = r;
                    d.worst_x = Some(*x);
                    d.worst_xi = Some(*xi);
                }
            }
        }
    }
    Ok(VerificationReport {
        check: "containment_step".into(),
        audit: Vec::new(),
        sample: format!("{} xi x {} outer x, {} matrices", xis.len(), xs.len(), family.len()),
        worst: d.min_ratio,
        series: Vec::new(),
        drift_limit: DRIFT_LIMIT,
        verdict: outcome(d.min_ratio >= 0.5),
        provenance: Provenance::default(),
        details: Details::Containment(d),
    })
}

/// Uniform points of `ball` and outer points at `1..10` expanded radii from a
/// random transformed center, both from `seed`.
pub fn containment_samples(ball: &Ball, family: &MatrixFamily, count: usize, seed: u64) -> Result<(Vec<Point>, Vec<Point>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = ball.dim();
    let unit = |rng: &mut ChaCha8Rng| -> Point {
        match dim {
            1 => Point::scalar(if rng.random::<bool>() { 1.0 } else { -1.0 }),
            _ => {
                let t = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                Point::planar(t.cos(), t.sin())
            }
        }
    };
    let mut xis = Vec::with_capacity(count);
    while xis.len() < count {
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = Point::new(&u)?;
        if u.norm() <= 1.0 {
            xis.push(ball.center.offset(&u, ball.radius));
        }
    }
    let reach = 2.0 * family.norm_bound() * ball.radius;
    let mut xs = Vec::with_capacity(count);
    let mut tries = 0usize;
    while xs.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::invalid("count", "could not draw enough outer points"));
        }
        let k = rng.random_range(0..family.len());
        let c = family.matrix(k).apply(&ball.center);
        let dist = reach * rng.random_range(1.0..10.0);
        let x = c.offset(&unit(&mut rng), dist);
        if classify(&x, ball, family).is_outer() {
            xs.push(x);
        }
    }
    Ok((xis, xs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhBallRow {
    pub ball: Ball,
    /// `[w^p(B)]^{-1/p} [w^q(B)]^{1/q}`
    pub lhs: f64,
    /// `[w^p]_{RH_{q/p}}^{1/p} |B|^{-α/n}`
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhBallDetails {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub rh_constant: f64,
    #[serde(with = "crate::report::ext_f64")]
    pub worst_slack: f64,
    pub rows: Vec<RhBallRow>,
}

/// The ball inequality implied by `w^p ∈ RH_{q/p}`. The constant is estimated
/// on the densified family; the inequality is checked on the given balls.
pub fn check_rh_ball_inequality(
    w: &WeightSpec,
    p: f64,
    alpha: f64,
    family: &BallFamily,
    scheme: &QuadratureScheme,
) -> Result<VerificationReport> {
    let n = w.dim as f64;
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be positive"));
    }
    let q = sobolev_exponent(w.dim, p, alpha)?;
    let wp = w.powered(p);
    let rh = estimate_rh_constant(&wp, q / p, &family.densified()?, scheme)?;
    let mut audit = Vec::new();
    require(
        &mut audit,
        "w^p in RH_{q/p}",
        rh.is_finite(),
        rh.constant,
        format!("RH_{} constant of w^{p}", q / p),
    )?;
    let rows: Vec<RhBallRow> = family
        .balls()
        .iter()
        .map(|b| -> Result<RhBallRow> {
            let lhs = w.measure(p, b, scheme)?.powf(-1.0 / p) * w.measure(q, b, scheme)?.powf(1.0 / q);
            let rhs = rh.constant.powf(1.0 / p) * b.volume().powf(-alpha / n);
            Ok(RhBallRow {
                ball: *b,
                lhs,
                rhs,
                slack: 1.0 - lhs / rhs,
            })
        })
        .collect::<Result<_>>()?;
    let worst_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    Ok(VerificationReport {
        check: "rh_ball_inequality".into(),
        audit,
        sample: format!("{} balls, constant from {} densified balls", rows.len(), family.densified()?.len()),
        worst: worst_slack,
        series: Vec::new(),
        drift_limit: DRIFT_LIMIT,
        verdict: outcome(worst_slack >= -SLACK_TOLERANCE),
        provenance: Provenance::default(),
        details: Details::RhBall(RhBallDetails {
            p,
            q,
            alpha,
            rh_constant: rh.constant,
            worst_slack,
            rows,
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub statement: String,
    #[serde(with = "crate::report::ext_f64")]
    pub lhs: f64,
    #[serde(with = "crate::report::ext_f64")]
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalIndexDetails {
    pub p: f64,
    pub q: Option<f64>,
    pub r_w: Bracket,
    pub r_wp: Bracket,
    pub r_wq: Option<Bracket>,
    pub checks: Vec<ChainCheck>,
}

/// `a r_a <= b r_b` on bracket midpoints, allowing the bisection error
/// `(a + b) tol`. Infinite right sides hold, infinite left sides only against them.
fn chain(statement: &str, a: f64, ra: &Bracket, b: f64, rb: &Bracket, tol: f64) -> ChainCheck {
    let lhs = a * ra.estimate();
    let rhs = b * rb.estimate();
    let slack = (a + b) * tol;
    let holds = rhs.is_infinite() || (lhs.is_finite() && lhs <= rhs + slack);
    ChainCheck {
        statement: statement.into(),
        lhs,
        rhs,
        slack,
        holds,
    }
}

/// `p r_{w^p} <= r_w <= r_{w^p}` (needs `p < 1`, `w^{1/p} ∈ A_1`) and, when
/// `q` is given, `p r_{w^p} <= q r_{w^q}` (needs `p < q`, `w^q ∈ A_1`).
pub fn check_critical_index_lemmas(
    w: &WeightSpec,
    p: f64,
    q: Option<f64>,
    family: &BallFamily,
    scheme: &QuadratureScheme,
    options: &CriticalIndexOptions,
) -> Result<VerificationReport> {
    if !(p > 0.0) {
        return Err(Error::invalid("p", "must be positive"));
    }
    let first = p < 1.0;
    if let Some(q) = q {
        if !(q > p && q.is_finite()) {
            return Err(Error::invalid("q", "needs p < q < inf"));
        }
    } else if !first {
        return Err(Error::invalid("p", "the chains need p < 1 or a q > p"));
    }
    let mut audit: Vec<AuditItem> = Vec::new();
    if first {
        let a1 = estimate_a1_constant(&w.powered(1.0 / p), family, scheme)?;
        require(&mut audit, "w^{1/p} in A_1", a1.is_finite(), a1.constant, format!("A_1 constant of w^{}", 1.0 / p))?;
    }
    if let Some(q) = q {
        let a1 = estimate_a1_constant(&w.powered(q), family, scheme)?;
        require(&mut audit, "w^q in A_1", a1.is_finite(), a1.constant, format!("A_1 constant of w^{q}"))?;
    }
    let tol = options.tol;
    let r_w = critical_indices(w, family, scheme, options)?.r_w;
    let r_wp = critical_indices(&w.powered(p), family, scheme, options)?.r_w;
    let mut checks = Vec::new();
    if first {
        checks.push(chain("p r_{w^p} <= r_w", p, &r_wp, 1.0, &r_w, tol));
        checks.push(chain("r_w <= r_{w^p}", 1.0, &r_w, 1.0, &r_wp, tol));
    }
    let r_wq = match q {
        Some(q) => {
            let r = critical_indices(&w.powered(q), family, scheme, options)?.r_w;
            checks.push(chain("p r_{w^p} <= q r_{w^q}", p, &r_wp, q, &r, tol));
            Some(r)
        }
        None => None,
    };
    let worst = checks
        .iter()
        .map(|c| if c.rhs.is_infinite() { f64::INFINITY } else { c.rhs + c.slack - c.lhs })
        .fold(f64::INFINITY, f64::min);
    Ok(VerificationReport {
        check: "critical_index_lemmas".into(),
        audit,
        sample: format!("{} balls, bisection tol {tol}", family.len()),
        worst,
        series: Vec::new(),
        drift_limit: DRIFT_LIMIT,
        verdict: outcome(checks.iter().all(|c| c.holds)),
        provenance: Provenance::default(),
        details: Details::CriticalIndices(CriticalIndexDetails {
            p,
            q,
            r_w,
            r_wp,
            r_wq,
            checks,
        }),
    })
}

/// `(Σ |λ_j|^e)^{1/e}` with `e = min(1, q)`.
pub fn quasi_norm_assembly(lambdas: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::invalid("q", "must be positive"));
    }
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("lambda", "coefficients must be finite"));
    }
    let e = q.min(1.0);
    Ok(lambdas.iter().map(|l| l.abs().powf(e)).sum::<f64>().powf(1.0 / e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiNormCheck {
    pub assembly: f64,
    /// `(Σ |λ_j|^p)^{1/p}`
    pub bound: f64,
    pub holds: bool,
}

/// The assembly against the `ℓ^p` quasi-norm, `p <= min(1, q)`.
pub fn check_quasi_norm_assembly(lambdas: &[f64], q: f64, p: f64) -> Result<QuasiNormCheck> {
    if !(p > 0.0 && p <= q.min(1.0)) {
        return Err(Error::invalid("p", format!("need 0 < p <= min(1, q), got {p}")));
    }
    let assembly = quasi_norm_assembly(lambdas, q)?;
    let bound = quasi_norm_assembly(lambdas, p)?;
    Ok(QuasiNormCheck {
        assembly,
        bound,
        holds: assembly <= bound * (1.0 + 1e-12),
    })
}
