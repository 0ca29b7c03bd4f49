use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{outcome, Details, Provenance, Series, VerificationReport, DRIFT_LIMIT};
use crate::atoms::{atom_seed, atoms_on_ball, Atom, AtomParams};
use crate::error::{Error, Result};
use crate::geometry::{classify, MatrixFamily, RegionLabel};
use crate::operators::{apply_t, fractional_maximal, ExponentProfile, MaximalPolicy, Profile, SampledFunction};
use crate::point::{Ball, Point};
use crate::quadrature::QuadratureScheme;
use crate::report::ratio;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomShape {
    /// Random polynomial atom from the atom constructor.
    #[default]
    Random,
    /// `sign(u_1)` scaled to the norm ceiling; only for `d = 0`.
    Sign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointwiseSpec {
    /// Atom center; the origin when absent.
    pub center: Option<Point>,
    pub radii: Vec<f64>,
    /// Sample distances from each transformed center, in units of `2 M r`.
    pub factors: Vec<f64>,
    pub shape: AtomShape,
    pub drift_limit: f64,
}

impl Default for PointwiseSpec {
    fn default() -> Self {
        PointwiseSpec {
            center: None,
            radii: vec![0.25, 1.0, 4.0],
            factors: vec![1.5, 2.0, 4.0, 8.0, 16.0],
            shape: AtomShape::Random,
            drift_limit: DRIFT_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSample {
    pub x: Point,
    /// Index `k` of the region `R_k`.
    pub region: usize,
    /// `|T a(x)|`
    pub lhs: f64,
    /// `w(B)^{-1/p} r^{n+d+1} |x - A_k x0|^{-n+α-d-1}`
    pub tmalpha_rhs: f64,
    pub tmalpha_ratio: f64,
    /// `w(B)^{-1/p} [M_{αn/(n+d+1)} χ_B (A_k^{-1} x)]^{(n+d+1)/n}`, for `α > 0`.
    pub maximal_rhs: Option<f64>,
    pub maximal_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseBound {
    pub samples: Vec<PointwiseSample>,
    pub c_tmalpha: f64,
    pub c_maximal: Option<f64>,
}

/// Both right-hand forms of the pointwise bound at outer points.
pub fn pointwise_atom_bound(
    atom: &Atom,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    xs: &[Point],
    scheme: &QuadratureScheme,
    policy: &MaximalPolicy,
) -> Result<PointwiseBound> {
    profile.validate()?;
    let dim = atom.params.dim;
    if profile.dim != dim || family.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: profile.dim,
        });
    }
    let labels: Vec<usize> = xs
        .iter()
        .map(|x| match classify(x, &atom.ball, family) {
            RegionLabel::Outer(k) => Ok(k),
            RegionLabel::Inside(i) => Err(Error::MisclassifiedSample {
                point: x.to_vec(),
                ball: i,
            }),
        })
        .collect::<Result<_>>()?;
    let n = dim as f64;
    let d = atom.params.d as f64;
    let alpha = profile.alpha;
    let r = atom.ball.radius;
    let scale = atom.weight_measure.powf(-1.0 / atom.params.p);
    let f = atom.function();
    let chi = SampledFunction::indicator(atom.ball);
    let beta = alpha * n / (n + d + 1.0);
    let samples: Vec<PointwiseSample> = xs
        .par_iter()
        .zip(&labels)
        .map(|(x, &k)| -> Result<PointwiseSample> {
            let lhs = apply_t(&f, x, profile, family, scheme)?.abs();
            let c = family.matrix(k).apply(&atom.ball.center);
            let tmalpha_rhs = scale * r.powf(n + d + 1.0) * x.dist(&c).powf(-n + alpha - d - 1.0);
            let maximal_rhs = if alpha > 0.0 {
                let y = family.inverse(k).apply(x);
                let m = fractional_maximal(&chi, &y, beta, policy)?.value;
                Some(scale * m.powf((n + d + 1.0) / n))
            } else {
                None
            };
            Ok(PointwiseSample {
                x: *x,
                region: k,
                lhs,
                tmalpha_rhs,
                tmalpha_ratio: ratio(lhs, tmalpha_rhs),
                maximal_rhs,
                maximal_ratio: maximal_rhs.map(|m| ratio(lhs, m)),
            })
        })
        .collect::<Result<_>>()?;
    let c_tmalpha = samples.iter().map(|s| s.tmalpha_ratio).fold(0.0, f64::max);
    let c_maximal = (alpha > 0.0).then(|| samples.iter().filter_map(|s| s.maximal_ratio).fold(0.0, f64::max));
    Ok(PointwiseBound {
        samples,
        c_tmalpha,
        c_maximal,
    })
}

/// Points at `2 M r f` from each transformed center along the axes (and
/// diagonals in 2-D), keeping the outer ones.
pub fn outer_samples(ball: &Ball, family: &MatrixFamily, factors: &[f64]) -> Vec<Point> {
    let reach = 2.0 * family.norm_bound() * ball.radius;
    let dirs: Vec<Point> = match ball.dim() {
        1 => vec![Point::scalar(1.0), Point::scalar(-1.0)],
        _ => (0..8)
            .map(|j| {
                let t = j as f64 * std::f64::consts::FRAC_PI_4;
                Point::planar(t.cos(), t.sin())
            })
            .collect(),
    };
    let mut out: Vec<Point> = Vec::new();
    for a in family.matrices() {
        let c = a.apply(&ball.center);
        for f in factors {
            for u in &dirs {
                let x = c.offset(u, reach * f);
                if classify(&x, ball, family).is_outer() && !out.iter().any(|y| y.dist(&x) <= 1e-12 * reach) {
                    out.push(x);
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRun {
    pub radius: f64,
    pub refined: bool,
    pub atom_seed: Option<u64>,
    pub bound: PointwiseBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseDetails {
    pub alpha: f64,
    pub d: usize,
    pub runs: Vec<PointwiseRun>,
    /// Range of `maximal_rhs / tmalpha_rhs` over all samples (`α > 0`).
    pub form_ratio: Option<[f64; 2]>,
}

fn geometric_midpoints(factors: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, f) in factors.iter().enumerate() {
        out.push(*f);
        if let Some(g) = factors.get(i + 1) {
            out.push((f * g).sqrt());
        }
    }
    out
}

fn build_atom(ball: &Ball, params: &AtomParams, shape: AtomShape, seed: u64, scheme: &QuadratureScheme) -> Result<Atom> {
    match shape {
        AtomShape::Random => atoms_on_ball(ball, params, seed, scheme),
        AtomShape::Sign => {
            if params.d != 0 {
                return Err(Error::invalid("shape", "the sign atom only has a vanishing mean (d = 0)"));
            }
            let mut a = Atom::from_parts(*ball, Profile::Sign, 1.0, params.clone(), scheme)?;
            a.coefficient = a.norm_ceiling() / a.lp0_norm()?;
            Ok(a)
        }
    }
}

/// The pointwise bound over atoms of radii `spec.radii`, at the base sample
/// and at a refined one (geometric midpoints added, twice the quadrature and
/// maximal lattices). Passes if every constant series stays within the drift limit.
#[allow(clippy::too_many_arguments)]
pub fn check_pointwise_atom_bound(
    spec: &PointwiseSpec,
    params: &AtomParams,
    profile: &ExponentProfile,
    family: &MatrixFamily,
    seed: u64,
    scheme: &QuadratureScheme,
    weight_scheme: &QuadratureScheme,
    policy: &MaximalPolicy,
) -> Result<VerificationReport> {
    if spec.radii.is_empty() || spec.factors.iter().any(|f| !(*f > 1.0)) {
        return Err(Error::invalid("factors", "need radii and sample factors above 1"));
    }
    let center = spec.center.unwrap_or_else(|| Point::origin(params.dim));
    let mut runs = Vec::new();
    for refined in [false, true] {
        let (factors, q, pol) = if refined {
            (geometric_midpoints(&spec.factors), scheme.refined(2), policy.refined())
        } else {
            (spec.factors.clone(), *scheme, policy.clone())
        };
        for &r in &spec.radii {
            let ball = Ball::new(center, r)?;
            // one profile for every radius, so the radius series compares dilates
            let atom = build_atom(&ball, params, spec.shape, atom_seed(seed, 0), weight_scheme)?;
            let xs = outer_samples(&ball, family, &factors);
            let bound = pointwise_atom_bound(&atom, profile, family, &xs, &q, &pol)?;
            runs.push(PointwiseRun {
                radius: r,
                refined,
                atom_seed: atom.seed,
                bound,
            });
        }
    }
    let base: Vec<&PointwiseRun> = runs.iter().filter(|r| !r.refined).collect();
    let fine: Vec<&PointwiseRun> = runs.iter().filter(|r| r.refined).collect();
    let max_of = |rs: &[&PointwiseRun], f: &dyn Fn(&PointwiseRun) -> f64| rs.iter().map(|r| f(r)).fold(0.0, f64::max);
    let tm = |r: &PointwiseRun| r.bound.c_tmalpha;
    let mx = |r: &PointwiseRun| r.bound.c_maximal.unwrap_or(0.0);
    let mut series = vec![
        Series::new("tmalpha_vs_radius", spec.radii.clone(), base.iter().map(|r| tm(r)).collect()),
        Series::new("tmalpha_refinement", vec![1.0, 2.0], vec![max_of(&base, &tm), max_of(&fine, &tm)]),
    ];
    let alpha = profile.alpha;
    let mut form_ratio = None;
    if alpha > 0.0 {
        series.push(Series::new("maximal_vs_radius", spec.radii.clone(), base.iter().map(|r| mx(r)).collect()));
        series.push(Series::new("maximal_refinement", vec![1.0, 2.0], vec![max_of(&base, &mx), max_of(&fine, &mx)]));
        let ratios: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.bound.samples.iter())
            .filter_map(|s| s.maximal_rhs.map(|m| m / s.tmalpha_rhs))
            .collect();
        form_ratio = Some([
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max),
        ]);
    }
    let samples: usize = runs.iter().map(|r| r.bound.samples.len()).sum();
    let worst = runs.iter().map(|r| r.bound.c_tmalpha).fold(0.0, f64::max);
    let pass = series.iter().all(|s| s.stable(spec.drift_limit));
    Ok(VerificationReport {
        check: "pointwise_atom_bound".into(),
        audit: Vec::new(),
        sample: format!(
            "{} radii, {samples} outer points over base and refined samples, {:?} atoms",
            spec.radii.len(),
            spec.shape
        ),
        worst,
        series,
        drift_limit: spec.drift_limit,
        verdict: outcome(pass),
        provenance: Provenance {
            seed: Some(seed),
            config_hash: None,
        },
        details: Details::Pointwise(PointwiseDetails {
            alpha,
            d: params.d,
            runs,
            form_ratio,
        }),
    })
}
