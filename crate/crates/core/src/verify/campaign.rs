//! Atom campaigns for the two boundedness theorems: audit the hypotheses,
//! draw atoms, and integrate `|T a|` in the target norm over the expanded
//! balls and the outer region separately.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nodes::{line_nodes, plane_nodes, sum_nodes, NodePolicy};
use super::{outcome, require, sobolev_exponent, AuditItem, Details, Provenance, Series, VerificationReport, DRIFT_LIMIT};
use crate::atoms::{atom_seed, atoms_on_ball, range_from_indices, Atom, AtomParams, BallSamplerSpec};
use crate::error::{Error, Result};
use crate::geometry::{classify, expanded_balls, MatrixFamily, RegionLabel};
use crate::operators::{apply_t_at, ExponentProfile};
use crate::point::{Ball, Point};
use crate::quadrature::QuadratureScheme;
use crate::weights::{
    check_matrix_compatibility, critical_indices, estimate_a1_constant, estimate_class, estimate_rh_constant, BallFamily,
    BallFamilySpec, CriticalIndexOptions, CriticalIndices, WeightClass, WeightSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// `α = 0`, `m >= 2`: `H^p_w -> L^p_w`.
    Thm1,
    /// `0 < α < n`: `H^p_{w^p} -> L^q_{w^q}`.
    Ta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremSetup {
    pub theorem: Theorem,
    pub weight: WeightSpec,
    pub profile: ExponentProfile,
    pub family: MatrixFamily,
    pub p: f64,
    /// `Ta`: the `s` of the `A_1` hypothesis on `w^{n/((n-α)s)}`.
    pub s: Option<f64>,
    pub p0: Option<f64>,
    pub d: Option<usize>,
}

/// Numerical knobs shared by the audit and the campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct Numerics {
    pub weights: QuadratureScheme,
    pub operator: QuadratureScheme,
    pub family: BallFamilySpec,
    pub indices: CriticalIndexOptions,
    pub nodes: NodePolicy,
    /// Largest `w(A_j x) / w(x)` accepted as bounded.
    pub compatibility_cap: f64,
}

impl Numerics {
    pub fn for_dim(dim: usize) -> Self {
        Numerics {
            weights: QuadratureScheme::for_weights(),
            // plane campaigns evaluate T at thousands of nodes; a coarser lattice keeps them tractable
            operator: if dim == 1 {
                QuadratureScheme::for_operators(1)
            } else {
                QuadratureScheme {
                    resolution: 16,
                    ..QuadratureScheme::for_operators(2)
                }
            },
            family: BallFamilySpec::default(),
            indices: CriticalIndexOptions::default(),
            nodes: NodePolicy::for_dim(dim),
            compatibility_cap: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSpec {
    pub atoms: usize,
    pub seed: u64,
    /// Atom `i` gets radius `radii[i mod len]`.
    pub radii: Vec<f64>,
    /// Centers drawn from the lattice `step Z^n ∩ [-extent, extent]^n`.
    pub center_extent: f64,
    pub center_step: f64,
    pub drift_limit: f64,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            atoms: 50,
            seed: 0,
            radii: vec![0.25, 1.0, 4.0],
            center_extent: 2.0,
            center_step: 0.5,
            drift_limit: DRIFT_LIMIT,
        }
    }
}

impl CampaignSpec {
    pub fn balls(&self, dim: usize) -> Result<Vec<Ball>> {
        if self.atoms == 0 || self.radii.is_empty() {
            return Err(Error::invalid("atoms", "a campaign needs atoms and radii"));
        }
        let centers = BallSamplerSpec {
            center_extent: self.center_extent,
            center_step: self.center_step,
            k_min: 0,
            k_max: 0,
        }
        .centers(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2);
        (0..self.atoms)
            .map(|i| Ball::new(centers[rng.random_range(0..centers.len())], self.radii[i % self.radii.len()]))
            .collect()
    }
}

/// Outcome of the audit: the evidence plus the atom parameters and target
/// norm it fixes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisAudit {
    pub items: Vec<AuditItem>,
    pub params: AtomParams,
    /// Target norm `L^t_{w^u}` with `t = exponent`, `u = weight_power`.
    pub exponent: f64,
    pub weight_power: f64,
    pub indices: CriticalIndices,
}

fn compatibility_sample(w: &WeightSpec) -> Vec<Point> {
    let sing = w.singular_centers();
    let mut out = Vec::new();
    for k in -6..=6 {
        let t = 1.3 * 2f64.powi(k);
        let pts = match w.dim {
            1 => vec![Point::scalar(t), Point::scalar(-t)],
            _ => vec![
                Point::planar(t, 0.3 * t),
                Point::planar(-0.7 * t, t),
                Point::planar(0.2 * t, -t),
            ],
        };
        out.extend(pts.into_iter().filter(|x| sing.iter().all(|s| s.dist(x) > 1e-9)));
    }
    out
}

fn class_finite(w: &WeightSpec, class: WeightClass, fam: &BallFamily, q: &QuadratureScheme) -> Result<(bool, f64)> {
    let r = estimate_class(w, class, fam, q)?;
    Ok((r.is_finite(), r.constant))
}

/// `(p0 / p)'`, the reverse Hölder exponent the atoms need.
fn rh_exponent(p0: f64, p: f64) -> f64 {
    let t = p0 / p;
    t / (t - 1.0)
}

/// Checks every hypothesis of the theorem; the first failure is returned as
/// `HypothesisFailed`.
pub fn audit_hypotheses(setup: &TheoremSetup, numerics: &Numerics) -> Result<HypothesisAudit> {
    let w = &setup.weight;
    let dim = w.dim;
    let n = dim as f64;
    setup.profile.validate()?;
    if setup.profile.dim != dim || setup.family.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: setup.profile.dim,
        });
    }
    if setup.profile.m() != setup.family.len() {
        return Err(Error::invalid("exponents", "one exponent per matrix is required"));
    }
    let alpha = setup.profile.alpha;
    let p = setup.p;
    let fam = BallFamily::generate(&numerics.family, dim, &w.singular_centers())?;
    let q_w = &numerics.weights;
    let mut items = Vec::new();

    require(&mut items, "0 < p <= 1", p > 0.0 && p <= 1.0, p, "")?;
    let compat = check_matrix_compatibility(w, &setup.family, &compatibility_sample(w))?;
    require(
        &mut items,
        "w(A_j x) <= C w(x)",
        compat.is_finite() && compat <= numerics.compatibility_cap,
        compat,
        format!("sampled sup, cap {}", numerics.compatibility_cap),
    )?;

    match setup.theorem {
        Theorem::Thm1 => {
            require(&mut items, "alpha = 0", alpha == 0.0, alpha, "")?;
            let m = setup.family.len();
            require(&mut items, "m >= 2", m >= 2, m as f64, "")?;
            let worst = match setup.family.check_differences_invertible() {
                Ok(list) => list.iter().map(|c| c.2).fold(1.0, f64::max),
                Err(Error::SingularDifference { i, j, condition }) => {
                    require(
                        &mut items,
                        "A_i - A_j invertible",
                        false,
                        condition,
                        format!("A_{i} - A_{j} is singular"),
                    )?;
                    unreachable!()
                }
                Err(e) => return Err(e),
            };
            require(&mut items, "A_i - A_j invertible", true, worst, "largest condition number")?;
            let indices = critical_indices(w, &fam, q_w, &numerics.indices)?;
            let q_hi = indices.q_tilde_upper();
            let (in_ap, c) = if q_hi.is_finite() {
                let class = if q_hi <= 1.0 { WeightClass::A1 } else { WeightClass::Ap { p: q_hi } };
                class_finite(w, class, &fam, q_w)?
            } else {
                (false, f64::INFINITY)
            };
            require(&mut items, "w in A_inf", in_ap, c, format!("A_p constant at p = {q_hi}"))?;
            let range = range_from_indices(dim, p, indices);
            let conj = indices.r_w_conjugate();
            let d = setup.d.unwrap_or(range.d_min);
            require(
                &mut items,
                "d >= floor(n (q_w / p - 1))",
                d >= range.d_min,
                d as f64,
                format!("minimum {}", range.d_min),
            )?;
            let p0 = setup.p0.unwrap_or_else(|| (2.0 * conj.max(range.p0_threshold)).max(2.0));
            require(
                &mut items,
                "p0 > r_w / (r_w - 1)",
                p0 > conj && p0 > range.p0_threshold && p0.is_finite(),
                p0,
                format!("threshold {}", conj.max(range.p0_threshold)),
            )?;
            let s = rh_exponent(p0, p);
            let (ok, c) = class_finite(w, WeightClass::Rh { s }, &fam.densified()?, q_w)?;
            require(&mut items, "w in RH_{(p0/p)'}", ok, c, format!("s = {s}"))?;
            Ok(HypothesisAudit {
                items,
                params: AtomParams {
                    dim,
                    p,
                    p0,
                    d,
                    weight: w.clone(),
                },
                exponent: p,
                weight_power: 1.0,
                indices,
            })
        }
        Theorem::Ta => {
            require(&mut items, "0 < alpha < n", alpha > 0.0 && alpha < n, alpha, "")?;
            let s = setup
                .s
                .ok_or_else(|| Error::invalid("s", "the fractional theorem needs the exponent s"))?;
            require(&mut items, "0 < s < 1", s > 0.0 && s < 1.0, s, "")?;
            require(&mut items, "s <= p", s <= p, p, format!("s = {s}"))?;
            let q = sobolev_exponent(dim, p, alpha)?;
            let e = n / ((n - alpha) * s);
            let a1 = estimate_a1_constant(&w.powered(e), &fam, q_w)?;
            require(
                &mut items,
                "w^{n/((n-alpha)s)} in A_1",
                a1.is_finite(),
                a1.constant,
                format!("exponent {e}"),
            )?;
            let indices = critical_indices(w, &fam, q_w, &numerics.indices)?;
            let conj = indices.r_w_conjugate();
            require(
                &mut items,
                "r_w / (r_w - 1) < n / alpha",
                conj < n / alpha,
                conj,
                format!("r_w in [{}, {}], n / alpha = {}", indices.r_w.lo, indices.r_w.hi, n / alpha),
            )?;
            let wp = w.powered(p);
            let fam_p = BallFamily::generate(&numerics.family, dim, &wp.singular_centers())?;
            let range = range_from_indices(dim, p, critical_indices(&wp, &fam_p, q_w, &numerics.indices)?);
            let d = setup.d.unwrap_or(((n * (1.0 / p - 1.0)) + 1e-12).floor().max(0.0) as usize);
            require(
                &mut items,
                "d >= floor(n (q_{w^p} / p - 1))",
                d >= range.d_min,
                d as f64,
                format!("minimum {}", range.d_min),
            )?;
            let lo = conj.max(range.p0_threshold);
            let p0 = setup.p0.unwrap_or(0.5 * (lo + n / alpha));
            require(
                &mut items,
                "r_w / (r_w - 1) < p0 < n / alpha",
                p0 > lo && p0 < n / alpha,
                p0,
                format!("open interval ({lo}, {})", n / alpha),
            )?;
            let rs = rh_exponent(p0, p);
            let (ok, c) = class_finite(&wp, WeightClass::Rh { s: rs }, &fam_p.densified()?, q_w)?;
            require(&mut items, "w^p in RH_{(p0/p)'}", ok, c, format!("s = {rs}"))?;
            let rh = estimate_rh_constant(&wp, q / p, &fam_p.densified()?, q_w)?;
            require(&mut items, "w^p in RH_{q/p}", rh.is_finite(), rh.constant, format!("q = {q}"))?;
            Ok(HypothesisAudit {
                items,
                params: AtomParams {
                    dim,
                    p,
                    p0,
                    d,
                    weight: wp,
                },
                exponent: q,
                weight_power: q,
                indices,
            })
        }
    }
}

/// `∫ |T a|^t u` split into the expanded balls, the outer region up to the
/// last shell, and the extrapolated tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSplit {
    pub ball: Ball,
    pub seed: Option<u64>,
    pub inner: f64,
    pub outer: f64,
    #[serde(with = "crate::report::ext_f64")]
    pub tail: f64,
    /// `(inner + outer + tail)^{1/t}`
    #[serde(with = "crate::report::ext_f64")]
    pub norm: f64,
}

pub fn target_split(
    atom: &Atom,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    weight: &WeightSpec,
    exponent: f64,
    scheme: &QuadratureScheme,
    policy: &NodePolicy,
) -> Result<AtomSplit> {
    let ball = &atom.ball;
    let stars = expanded_balls(ball, family);
    let reach = stars[0].radius;
    let sing = weight.singular_centers();
    let (nodes, sides) = match ball.dim() {
        1 => {
            let mut special = vec![0.0];
            for (j, a) in family.matrices().iter().enumerate() {
                let c = stars[j].center.get(0);
                special.extend([c - reach, c, c + reach]);
                for e in [-1.0, 1.0] {
                    special.push(a.apply(&ball.center.offset(&Point::scalar(e), ball.radius)).get(0));
                }
            }
            special.extend(sing.iter().map(|s| s.get(0)));
            (line_nodes(&special, reach, policy)?, 2)
        }
        _ => {
            let m = stars.len() as f64;
            let mut c = Point::origin(2);
            for s in &stars {
                c = c.add(&s.center.scale(1.0 / m));
            }
            let mut radii = Vec::new();
            let mut core: f64 = 0.0;
            for s in &stars {
                let t = s.center.dist(&c);
                radii.extend([t - reach, t, t + reach]);
                core = core.max(t + reach);
            }
            for s in &sing {
                radii.push(s.dist(&c));
                core = core.max(s.dist(&c) + reach);
            }
            (plane_nodes(&c, &radii, core, policy)?, 1)
        }
    };
    let f = atom.function();
    let evals: Vec<(f64, bool)> = nodes
        .par_iter()
        .map(|node| -> Result<(f64, bool)> {
            let inner = matches!(classify(&node.x, ball, family), RegionLabel::Inside(_));
            let t = apply_t_at(&f, &node.x, profile, family, scheme)?.abs();
            let u = if t == 0.0 { 0.0 } else { weight.eval(&node.x)? };
            Ok((t.powf(exponent) * u, inner))
        })
        .collect::<Result<_>>()?;
    let inner: f64 = nodes.iter().zip(&evals).filter(|(_, e)| e.1).map(|(n, e)| n.weight * e.0).sum();
    let outer_values: Vec<f64> = evals.iter().map(|e| if e.1 { 0.0 } else { e.0 }).collect();
    let sums = sum_nodes(&nodes, &outer_values, sides, policy.shells);
    let outer = sums.core + sums.shells;
    let norm = (inner + outer + sums.tail).powf(1.0 / exponent);
    Ok(AtomSplit {
        ball: *ball,
        seed: atom.seed,
        inner,
        outer,
        tail: sums.tail,
        norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignDetails {
    pub theorem: Theorem,
    pub params: AtomParams,
    pub exponent: f64,
    pub weight_power: f64,
    pub splits: Vec<AtomSplit>,
    pub worst_index: usize,
    pub worst_refined: AtomSplit,
    /// Unweighted `‖T a‖_{p0}` of the worst atom (first theorem only).
    pub lp0_spot_check: Option<f64>,
}

/// Audits the setup, then runs the atom campaign and reports the largest
/// target norm per radius and under refinement of the worst atom.
pub fn run_theorem_campaign(setup: &TheoremSetup, spec: &CampaignSpec, numerics: &Numerics) -> Result<VerificationReport> {
    let mut audit = audit_hypotheses(setup, numerics)?;
    let dim = setup.weight.dim;
    let target_weight = setup.weight.powered(audit.weight_power);
    let balls = spec.balls(dim)?;
    let atoms: Vec<Atom> = balls
        .par_iter()
        .enumerate()
        .map(|(i, b)| atoms_on_ball(b, &audit.params, atom_seed(spec.seed, i), &numerics.weights))
        .collect::<Result<_>>()?;
    let split = |a: &Atom, q: &QuadratureScheme, nodes: &NodePolicy| {
        target_split(a, &setup.profile, &setup.family, &target_weight, audit.exponent, q, nodes)
    };
    let splits: Vec<AtomSplit> = atoms
        .iter()
        .map(|a| split(a, &numerics.operator, &numerics.nodes))
        .collect::<Result<_>>()?;
    let mut worst_index = 0;
    for (i, s) in splits.iter().enumerate() {
        if !(s.norm <= splits[worst_index].norm) {
            worst_index = i;
        }
    }
    let worst_atom = &atoms[worst_index];
    let worst_refined = split(worst_atom, &numerics.operator.refined(2), &numerics.nodes.refined())?;

    let lp0_spot_check = if setup.theorem == Theorem::Thm1 {
        let one = WeightSpec::constant(dim);
        let s = target_split(
            worst_atom,
            &setup.profile,
            &setup.family,
            &one,
            audit.params.p0,
            &numerics.operator,
            &numerics.nodes,
        )?;
        require(
            &mut audit.items,
            "T a in L^{p0} (spot check)",
            s.norm.is_finite(),
            s.norm,
            "unweighted norm of the worst atom",
        )?;
        Some(s.norm)
    } else {
        None
    };

    let per_radius: Vec<f64> = spec
        .radii
        .iter()
        .map(|r| {
            splits
                .iter()
                .filter(|s| s.ball.radius == *r)
                .map(|s| s.norm)
                .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) })
        })
        .collect();
    let series = vec![
        Series::new("max_norm_vs_radius", spec.radii.clone(), per_radius),
        Series::new(
            "worst_atom_refinement",
            vec![1.0, 2.0],
            vec![splits[worst_index].norm, worst_refined.norm],
        ),
    ];
    let worst = splits[worst_index].norm;
    let pass = worst.is_finite() && splits.iter().all(|s| s.norm.is_finite()) && series.iter().all(|s| s.stable(spec.drift_limit));
    Ok(VerificationReport {
        check: match setup.theorem {
            Theorem::Thm1 => "theorem_campaign_thm1".into(),
            Theorem::Ta => "theorem_campaign_ta".into(),
        },
        audit: audit.items,
        sample: format!(
            "{} atoms, radii {:?}, centers on step {} within [-{}, {}]^{dim}",
            spec.atoms, spec.radii, spec.center_step, spec.center_extent, spec.center_extent
        ),
        worst,
        series,
        drift_limit: spec.drift_limit,
        verdict: outcome(pass),
        provenance: Provenance {
            seed: Some(spec.seed),
            config_hash: None,
        },
        details: Details::Campaign(CampaignDetails {
            theorem: setup.theorem,
            params: audit.params,
            exponent: audit.exponent,
            weight_power: audit.weight_power,
            splits,
            worst_index,
            worst_refined,
            lp0_spot_check,
        }),
    })
}
