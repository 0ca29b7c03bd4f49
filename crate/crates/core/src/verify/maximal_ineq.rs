use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nodes::{line_nodes, sum_nodes, NodePolicy};
use super::{outcome, sobolev_exponent, Details, Provenance, Series, VerificationReport};
use crate::error::{Error, Result};
use crate::operators::{fractional_maximal, hl_maximal, weighted_norm, MaximalPolicy, SampledFunction};
use crate::point::{Ball, Point};
use crate::quadrature::QuadratureScheme;
use crate::weights::WeightSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operator", rename_all = "snake_case")]
pub enum MaximalCase {
    /// `‖M f‖_{L^p_w} / ‖f‖_{L^p_w}`
    HardyLittlewood { p: f64 },
    /// `‖M_α f‖_{L^q_{w^q}} / ‖f‖_{L^p_{w^p}}`, `1/q = 1/p - α/n`
    Fractional { p: f64, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalRow {
    pub refined: bool,
    pub ball: Ball,
    #[serde(with = "crate::report::ext_f64")]
    pub lhs: f64,
    pub rhs: f64,
    #[serde(with = "crate::report::ext_f64")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalDetails {
    pub case: MaximalCase,
    pub q: f64,
    /// Infinite ratios, or growth past the drift limit under refinement.
    pub diverging: bool,
    pub rows: Vec<MaximalRow>,
}

fn norm_of_maximal(
    f: &SampledFunction,
    eval: &(dyn Fn(&Point) -> Result<f64> + Sync),
    w: &WeightSpec,
    t: f64,
    nodes: &NodePolicy,
) -> Result<f64> {
    let (a, b) = f.interval();
    let mut special = vec![a, b];
    special.extend(w.singular_centers().iter().map(|s| s.get(0)));
    let pts = line_nodes(&special, b - a, nodes)?;
    let values: Vec<f64> = pts
        .par_iter()
        .map(|n| -> Result<f64> {
            let m = eval(&n.x)?;
            Ok(if m == 0.0 { 0.0 } else { m.powf(t) * w.eval(&n.x)? })
        })
        .collect::<Result<_>>()?;
    let s = sum_nodes(&pts, &values, 2, nodes.shells);
    Ok((s.core + s.shells + s.tail).powf(1.0 / t))
}

/// Norm ratios of the maximal operator over indicators of `tests`, then over
/// a refined run (tests plus their halves, doubled lattices and nodes).
/// Passes if the sup ratio is finite and stable; otherwise the case is
/// reported as diverging.
pub fn check_maximal_inequalities(
    w: &WeightSpec,
    case: MaximalCase,
    tests: &[Ball],
    policy: &MaximalPolicy,
    nodes: &NodePolicy,
    scheme: &QuadratureScheme,
    drift_limit: f64,
) -> Result<VerificationReport> {
    if w.dim != 1 {
        return Err(Error::invalid("dim", "maximal inequality checks run on the line only"));
    }
    if tests.is_empty() || tests.iter().any(|b| b.dim() != 1) {
        return Err(Error::invalid("tests", "need at least one interval"));
    }
    let (p, q) = match case {
        MaximalCase::HardyLittlewood { p } if p > 1.0 && p.is_finite() => (p, p),
        MaximalCase::Fractional { p, alpha } if p > 1.0 && alpha > 0.0 => (p, sobolev_exponent(1, p, alpha)?),
        _ => return Err(Error::invalid("p", "need 1 < p (< n / alpha)")),
    };
    let (target, source_power) = match case {
        MaximalCase::HardyLittlewood { .. } => (w.clone(), 1.0),
        MaximalCase::Fractional { .. } => (w.powered(q), p),
    };
    let mut rows = Vec::new();
    for refined in [false, true] {
        let (pol, nod) = if refined {
            (policy.refined(), nodes.refined())
        } else {
            (policy.clone(), nodes.clone())
        };
        let mut balls = tests.to_vec();
        if refined {
            balls.extend(tests.iter().map(|b| b.dilate(0.5)));
        }
        for b in balls {
            let f = SampledFunction::indicator(b);
            let eval = |x: &Point| -> Result<f64> {
                Ok(match case {
                    MaximalCase::HardyLittlewood { .. } => hl_maximal(&f, x, &pol)?.value,
                    MaximalCase::Fractional { alpha, .. } => fractional_maximal(&f, x, alpha, &pol)?.value,
                })
            };
            let lhs = norm_of_maximal(&f, &eval, &target, q, &nod)?;
            let rhs = weighted_norm(&f, p, w, source_power, scheme)?;
            rows.push(MaximalRow {
                refined,
                ball: b,
                lhs,
                rhs,
                ratio: lhs / rhs,
            });
        }
    }
    let sup = |refined: bool| {
        rows.iter()
            .filter(|r| r.refined == refined)
            .map(|r| r.ratio)
            .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    };
    let series = Series::new("sup_ratio_refinement", vec![1.0, 2.0], vec![sup(false), sup(true)]);
    let diverging = !series.stable(drift_limit);
    Ok(VerificationReport {
        check: "maximal_inequality".into(),
        audit: Vec::new(),
        sample: format!("{} indicator tests, {} rows", tests.len(), rows.len()),
        worst: sup(true).max(sup(false)),
        series: vec![series],
        drift_limit,
        verdict: outcome(!diverging),
        provenance: Provenance::default(),
        details: Details::Maximal(MaximalDetails {
            case,
            q,
            diverging,
            rows,
        }),
    })
}
