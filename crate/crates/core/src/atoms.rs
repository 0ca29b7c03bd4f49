//! Weighted atoms: compactly supported, normalized against `w(B)`, with
//! vanishing moments up to order `d`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{Profile, SampledFunction};
use crate::point::{unit_ball_volume, Ball, Point};
use crate::polynomial::{monomial, monomials, unit_ball_moment, Polynomial};
use crate::quadrature::{gauss_legendre, integrate_ball, FnIntegrand, QuadratureScheme};
use crate::weights::{critical_indices, BallFamily, CriticalIndexOptions, CriticalIndices, WeightSpec};

/// Relative slack allowed on the norm ceiling.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Moments must stay below this multiple of `‖a‖_{p0} r^{|β| + n(1 - 1/p0)}`.
pub const MOMENT_TOLERANCE: f64 = 1e-10;
/// A projected profile smaller than this fraction of the draw is rejected.
pub const DEGENERATE_RATIO: f64 = 1e-12;
const MAX_RETRIES: u64 = 16;
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomParams {
    pub dim: usize,
    pub p: f64,
    pub p0: f64,
    pub d: usize,
    pub weight: WeightSpec,
}

/// What the weight allows: `p0 > p0_threshold` and `d >= d_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleRange {
    pub p: f64,
    pub p0_threshold: f64,
    pub d_min: usize,
    pub indices: CriticalIndices,
}

impl AdmissibleRange {
    /// Parameters inside the range; `p0` defaults to `max(2, 2 threshold)` and `d` to `d_min`.
    pub fn params(&self, w: &WeightSpec, p0: Option<f64>, d: Option<usize>) -> Result<AtomParams> {
        let params = AtomParams {
            dim: w.dim,
            p: self.p,
            p0: p0.unwrap_or_else(|| (2.0 * self.p0_threshold).max(2.0)),
            d: d.unwrap_or(self.d_min),
            weight: w.clone(),
        };
        self.check(&params)?;
        Ok(params)
    }

    pub fn check(&self, params: &AtomParams) -> Result<()> {
        params.validate()?;
        if !(params.p0 > self.p0_threshold) {
            return Err(Error::invalid(
                "p0",
                format!("must exceed {} for this weight, got {}", self.p0_threshold, params.p0),
            ));
        }
        if params.d < self.d_min {
            return Err(Error::invalid("d", format!("must be at least {}, got {}", self.d_min, params.d)));
        }
        Ok(())
    }
}

impl AtomParams {
    pub fn validate(&self) -> Result<()> {
        crate::point::check_dim(self.dim)?;
        if self.weight.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.weight.dim,
            });
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid("p", format!("must lie in (0, 1], got {}", self.p)));
        }
        if !(self.p0 >= 1.0 && self.p0.is_finite()) {
            return Err(Error::invalid("p0", "must be finite and at least 1"));
        }
        Ok(())
    }
}

/// `p0` threshold `max{1, p r_w / (r_w - 1)}` and `d_min = ⌊n (q̃_w / p - 1)⌋`
/// from the weight's critical indices (conservative bracket ends).
pub fn admissible_params(
    w: &WeightSpec,
    p: f64,
    family: &BallFamily,
    scheme: &QuadratureScheme,
    options: &CriticalIndexOptions,
) -> Result<AdmissibleRange> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    let indices = critical_indices(w, family, scheme, options)?;
    Ok(range_from_indices(w.dim, p, indices))
}

pub fn range_from_indices(dim: usize, p: f64, indices: CriticalIndices) -> AdmissibleRange {
    let n = dim as f64;
    let q = indices.q_tilde_upper();
    let d_min = if q.is_finite() {
        (n * (q / p - 1.0)).floor().max(0.0) as usize
    } else {
        usize::MAX
    };
    AdmissibleRange {
        p,
        p0_threshold: (p * indices.r_w_conjugate()).max(1.0),
        d_min,
        indices,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub ball: Ball,
    /// Profile on the ball, in local coordinates for polynomials.
    pub profile: Profile,
    pub coefficient: f64,
    pub params: AtomParams,
    #[serde(default)]
    pub seed: Option<u64>,
    /// `w(B)` at construction time.
    pub weight_measure: f64,
}

impl Atom {
    /// Wraps an arbitrary profile, e.g. for diagnostics on non-atoms.
    pub fn from_parts(ball: Ball, profile: Profile, coefficient: f64, params: AtomParams, scheme: &QuadratureScheme) -> Result<Self> {
        params.validate()?;
        if ball.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                found: ball.dim(),
            });
        }
        let weight_measure = params.weight.measure(1.0, &ball, scheme)?;
        Ok(Atom {
            ball,
            profile,
            coefficient,
            params,
            seed: None,
            weight_measure,
        })
    }

    pub fn function(&self) -> SampledFunction {
        SampledFunction {
            support: self.ball,
            profile: self.profile.clone(),
            coefficient: self.coefficient,
        }
    }

    pub fn eval(&self, y: &Point) -> f64 {
        self.function().eval(y)
    }

    /// `|B|^{1/p0} w(B)^{-1/p}`
    pub fn norm_ceiling(&self) -> f64 {
        ceiling(&self.ball, self.weight_measure, &self.params)
    }

    /// `‖a‖_{L^{p0}}`.
    pub fn lp0_norm(&self) -> Result<f64> {
        let n = self.params.dim as f64;
        let unit = unit_profile_norm(&self.profile, self.params.dim, self.params.p0)?;
        Ok(self.coefficient.abs() * self.ball.radius.powf(n / self.params.p0) * unit)
    }

    /// `∫ (y - x0)^β a(y) dy`.
    pub fn centered_moment(&self, beta: [usize; 2]) -> Result<f64> {
        let n = self.params.dim as f64;
        let order = (beta[0] + beta[1]) as f64;
        let unit = unit_profile_moment(&self.profile, self.params.dim, beta)?;
        Ok(self.coefficient * self.ball.radius.powf(n + order) * unit)
    }

    /// `λ^{n/p} a(λ y)` on `B(x0/λ, r/λ)`.
    pub fn dilated(&self, lambda: f64, scheme: &QuadratureScheme) -> Result<Self> {
        let n = self.params.dim as f64;
        let ball = Ball::new(self.ball.center.scale(1.0 / lambda), self.ball.radius / lambda)?;
        let mut out = Atom::from_parts(
            ball,
            self.profile.clone(),
            self.coefficient * lambda.powf(n / self.params.p),
            self.params.clone(),
            scheme,
        )?;
        out.seed = self.seed;
        Ok(out)
    }
}

fn ceiling(ball: &Ball, weight_measure: f64, params: &AtomParams) -> f64 {
    ball.volume().powf(1.0 / params.p0) * weight_measure.powf(-1.0 / params.p)
}

/// Graded Gauss-Legendre on `[a, b]`, refined geometrically toward both ends
/// so endpoint behaviour like `|t|^γ` is integrated to near machine precision.
fn graded_segment(a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
    const LEVELS: i32 = 40;
    let (x, w) = gauss_legendre(10);
    let rule = |u: f64, v: f64| {
        let (m, h) = (0.5 * (u + v), 0.5 * (v - u));
        x.iter().zip(w).map(|(xi, wi)| wi * f(m + h * xi)).sum::<f64>() * h
    };
    let half = 0.5 * (b - a);
    let mut total = 0.0;
    for k in 0..LEVELS {
        let outer = half * 0.5f64.powi(k);
        let inner = half * 0.5f64.powi(k + 1);
        total += rule(a + inner, a + outer);
        total += rule(b - outer, b - inner);
    }
    total
}

/// Roots of `g` in `(0, 1)` by sign scan and bisection.
fn roots_on_unit_segment(g: &impl Fn(f64) -> f64, scan: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut t0 = 0.0;
    let mut g0 = g(t0);
    for i in 1..=scan {
        let t1 = i as f64 / scan as f64;
        let g1 = g(t1);
        if g0 * g1 < 0.0 {
            let (mut a, mut b, mut ga) = (t0, t1, g0);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let gm = g(m);
                if ga * gm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    ga = gm;
                }
            }
            roots.push(0.5 * (a + b));
        } else if g1 == 0.0 && i < scan {
            roots.push(t1);
        }
        t0 = t1;
        g0 = g1;
    }
    roots
}

fn split_integral(breaks: &[f64], f: &impl Fn(f64) -> f64) -> f64 {
    breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| graded_segment(w[0], w[1], f)).sum()
}

/// `‖P‖_{L^{p0}(unit ball)}` for the profile.
fn unit_profile_norm(profile: &Profile, dim: usize, p0: f64) -> Result<f64> {
    match profile {
        Profile::Indicator | Profile::Sign => Ok(unit_ball_volume(dim).powf(1.0 / p0)),
        Profile::Polynomial(p) if p0 == 2.0 => Ok(p.l2_unit_norm()),
        Profile::Polynomial(p) => Ok(polynomial_unit_integral(p, p0).powf(1.0 / p0)),
        Profile::Grid(_) => Err(Error::invalid("profile", "atoms need an analytic profile")),
    }
}

/// `∫_{|u| <= 1} |P(u)|^{p0} du`: root-split graded rule in 1-D, polar rule
/// (trapezoid in angle, root-split graded rule along each ray) in 2-D.
fn polynomial_unit_integral(p: &Polynomial, p0: f64) -> f64 {
    let scan = 64 * (p.degree + 1);
    match p.dim {
        1 => {
            let mut breaks = vec![-1.0];
            breaks.extend(p.roots_in_unit_interval());
            breaks.push(1.0);
            split_integral(&breaks, &|t| p.eval(&Point::scalar(t)).abs().powf(p0))
        }
        _ => {
            const ANGLES: usize = 512;
            let mut total = 0.0;
            for k in 0..ANGLES {
                let th = 2.0 * std::f64::consts::PI * k as f64 / ANGLES as f64;
                let (c, s) = (th.cos(), th.sin());
                let ray = |rho: f64| p.eval(&Point::planar(rho * c, rho * s));
                let mut breaks = vec![0.0];
                breaks.extend(roots_on_unit_segment(&ray, scan));
                breaks.push(1.0);
                total += split_integral(&breaks, &|rho| ray(rho).abs().powf(p0) * rho);
            }
            total * 2.0 * std::f64::consts::PI / ANGLES as f64
        }
    }
}

/// `∫_{|u| <= 1} u^β P(u) du` for the profile.
fn unit_profile_moment(profile: &Profile, dim: usize, beta: [usize; 2]) -> Result<f64> {
    match profile {
        Profile::Indicator => Ok(unit_ball_moment(dim, beta)),
        Profile::Polynomial(p) => Ok(p.unit_moment(beta)),
        Profile::Sign if dim == 1 => Ok(if beta[0] % 2 == 1 {
            2.0 / (beta[0] as f64 + 1.0)
        } else {
            0.0
        }),
        Profile::Sign => {
            // sign(u1) u^β is odd in u1 unless β_1 is odd; then it is |u1|^{β_1} u2^{β_2}
            if beta[0] % 2 == 0 || beta[1] % 2 == 1 {
                return Ok(0.0);
            }
            let inner = |u1: f64| {
                let h = (1.0 - u1 * u1).max(0.0).sqrt();
                2.0 * h.powi(beta[1] as i32 + 1) / (beta[1] as f64 + 1.0)
            };
            Ok(2.0 * graded_segment(0.0, 1.0, &|u1| u1.powi(beta[0] as i32) * inner(u1)))
        }
        Profile::Grid(_) => Err(Error::invalid("profile", "atoms need an analytic profile")),
    }
}

/// Uniform draw of degree `d + 2` with the degree `<= d` part projected out.
fn draw_profile(dim: usize, d: usize, seed: u64) -> Result<Polynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degree = d + 2;
    let coeffs: Vec<f64> = (0..monomials(dim, degree).len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let raw = Polynomial::new(dim, degree, coeffs)?;
    let projected = raw.project_out_low_degree(d)?;
    let ratio = projected.l2_unit_norm() / raw.l2_unit_norm();
    if !(ratio >= DEGENERATE_RATIO) {
        return Err(Error::DegenerateProfile { ratio });
    }
    Ok(projected)
}

/// A seeded atom on `ball`, scaled so the norm condition holds with equality.
pub fn construct_atom(ball: &Ball, params: &AtomParams, seed: u64, scheme: &QuadratureScheme) -> Result<Atom> {
    params.validate()?;
    if ball.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            found: ball.dim(),
        });
    }
    let profile = draw_profile(params.dim, params.d, seed)?;
    let weight_measure = params.weight.measure(1.0, ball, scheme)?;
    if !(weight_measure > 0.0 && weight_measure.is_finite()) {
        return Err(Error::invalid("ball", format!("w(B) = {weight_measure} is not positive and finite")));
    }
    let mut atom = Atom {
        ball: *ball,
        profile: Profile::Polynomial(profile),
        coefficient: 1.0,
        params: params.clone(),
        seed: Some(seed),
        weight_measure,
    };
    let norm = atom.lp0_norm()?;
    atom.coefficient = atom.norm_ceiling() / norm;
    Ok(atom)
}

/// Per-condition outcome of [`validate_atom`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomValidation {
    pub support_ok: bool,
    pub norm: f64,
    pub ceiling: f64,
    /// `(ceiling - norm) / ceiling`; negative means the bound is violated.
    pub norm_margin: f64,
    pub norm_ok: bool,
    /// Largest `|moment| / allowance` over `|β| <= d`.
    pub worst_moment_ratio: f64,
    pub moments_ok: bool,
    pub pass: bool,
}

/// Checks support, the norm ceiling (with `w(B)` recomputed) and vanishing moments.
pub fn validate_atom(atom: &Atom, scheme: &QuadratureScheme) -> Result<AtomValidation> {
    let params = &atom.params;
    let n = params.dim as f64;
    let b = &atom.ball;
    // a is built from `ball` and vanishes off it; probe just outside as well
    let f = atom.function();
    let mut support_ok = f.support.center.dist(&b.center) + f.support.radius <= b.radius * (1.0 + 1e-12);
    for k in 0..8 {
        let th = std::f64::consts::PI * k as f64 / 4.0;
        let dir = match params.dim {
            1 => Point::scalar(if k % 2 == 0 { 1.0 } else { -1.0 }),
            _ => Point::planar(th.cos(), th.sin()),
        };
        support_ok &= f.eval(&b.center.offset(&dir, b.radius * (1.0 + 1e-9))) == 0.0;
    }
    let weight_measure = params.weight.measure(1.0, b, scheme)?;
    let ceiling = ceiling(b, weight_measure, params);
    let norm = atom.lp0_norm()?;
    let norm_margin = (ceiling - norm) / ceiling;
    let norm_ok = norm_margin >= -NORM_TOLERANCE;
    let mut worst: f64 = 0.0;
    for beta in monomials(params.dim, params.d) {
        let order = (beta[0] + beta[1]) as f64;
        let allowance = MOMENT_TOLERANCE * norm * b.radius.powf(order + n * (1.0 - 1.0 / params.p0));
        let m = atom.centered_moment(beta)?.abs();
        let r = if allowance > 0.0 {
            m / allowance
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(r);
    }
    let moments_ok = worst <= 1.0;
    Ok(AtomValidation {
        support_ok,
        norm,
        ceiling,
        norm_margin,
        norm_ok,
        worst_moment_ratio: worst,
        moments_ok,
        pass: support_ok && norm_ok && moments_ok,
    })
}

/// `∫ (y - x0)^β a(y) dy` by generic quadrature, independent of the exact moment path.
pub fn quadrature_moment(atom: &Atom, beta: [usize; 2], scheme: &QuadratureScheme) -> Result<f64> {
    let f = atom.function();
    let x0 = atom.ball.center;
    let g = FnIntegrand::new(atom.params.dim, |y: &Point| f.eval(y) * monomial(beta, &y.sub(&x0)));
    integrate_ball(&g, &atom.ball, scheme)
}

/// Where campaign balls come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallSamplerSpec {
    /// Centers on `[-extent, extent]^n` with spacing `step`.
    pub center_extent: f64,
    pub center_step: f64,
    /// Radii `2^k`, `k_min <= k <= k_max`.
    pub k_min: i32,
    pub k_max: i32,
}

impl Default for BallSamplerSpec {
    fn default() -> Self {
        BallSamplerSpec {
            center_extent: 2.0,
            center_step: 0.5,
            k_min: -2,
            k_max: 2,
        }
    }
}

impl BallSamplerSpec {
    pub(crate) fn centers(&self, dim: usize) -> Result<Vec<Point>> {
        if !(self.center_step > 0.0 && self.center_extent >= 0.0) || self.k_min > self.k_max {
            return Err(Error::invalid("sampler", "need a positive step and k_min <= k_max"));
        }
        let steps = (self.center_extent / self.center_step + 1e-9).floor() as i64;
        let coords: Vec<f64> = (-steps..=steps).map(|i| i as f64 * self.center_step).collect();
        Ok(match dim {
            1 => coords.iter().map(|&x| Point::scalar(x)).collect(),
            _ => coords
                .iter()
                .flat_map(|&x| coords.iter().map(move |&y| Point::planar(x, y)))
                .collect(),
        })
    }

    /// `count` balls from a dedicated stream of the campaign seed.
    pub fn draw(&self, dim: usize, count: usize, seed: u64) -> Result<Vec<Ball>> {
        let centers = self.centers(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        (0..count)
            .map(|_| {
                let c = centers[rng.random_range(0..centers.len())];
                let k = rng.random_range(self.k_min..=self.k_max);
                Ball::new(c, 2f64.powi(k))
            })
            .collect()
    }
}

/// Seed of atom `i` in a campaign.
pub fn atom_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(GOLDEN))
}

/// `count` validated atoms; degenerate draws move on to the next seed.
pub fn sample_atom_campaign(
    params: &AtomParams,
    sampler: &BallSamplerSpec,
    count: usize,
    seed: u64,
    scheme: &QuadratureScheme,
) -> Result<Vec<Atom>> {
    if count == 0 {
        return Err(Error::invalid("count", "a campaign needs at least one atom"));
    }
    let balls = sampler.draw(params.dim, count, seed)?;
    balls
        .par_iter()
        .enumerate()
        .map(|(i, b)| atoms_on_ball(b, params, atom_seed(seed, i), scheme))
        .collect()
}

/// One validated atom on `ball`, retrying degenerate draws with successive seeds.
pub fn atoms_on_ball(ball: &Ball, params: &AtomParams, seed: u64, scheme: &QuadratureScheme) -> Result<Atom> {
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        match construct_atom(ball, params, seed.wrapping_add(attempt), scheme) {
            Ok(a) => {
                let v = validate_atom(&a, scheme)?;
                if v.pass {
                    return Ok(a);
                }
                last = Some(Error::invalid("atom", format!("constructed atom failed validation: {v:?}")));
            }
            Err(e @ Error::DegenerateProfile { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// One JSON record per line.
pub fn write_atoms_jsonl<W: Write>(mut out: W, atoms: &[Atom]) -> Result<()> {
    for a in atoms {
        let line = serde_json::to_string(a).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_atoms_jsonl<R: BufRead>(input: R) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        atoms.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(atoms)
}

pub fn save_atoms(path: &Path, atoms: &[Atom]) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_atoms_jsonl(file, atoms)
}

pub fn load_atoms(path: &Path) -> Result<Vec<Atom>> {
    read_atoms_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_rule_handles_endpoint_powers() {
        let v = graded_segment(0.0, 1.0, &|t: f64| t.powf(0.3));
        assert!((v - 1.0 / 1.3).abs() < 1e-12);
    }

    #[test]
    fn sign_moments_in_the_plane() {
        // ∫_{disc} |u1| = 4/3
        let m = unit_profile_moment(&Profile::Sign, 2, [1, 0]).unwrap();
        assert!((m - 4.0 / 3.0).abs() < 1e-12, "{m}");
        assert_eq!(unit_profile_moment(&Profile::Sign, 2, [0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn polar_norm_matches_exact_l2() {
        let p = Polynomial::new(2, 2, vec![0.1, 0.5, -0.3, 1.0, 0.2, -0.7]).unwrap();
        let polar = polynomial_unit_integral(&p, 2.0).sqrt();
        assert!((polar - p.l2_unit_norm()).abs() < 1e-10 * polar);
        let p1 = Polynomial::new(1, 3, vec![0.1, -1.0, 0.4, 0.9]).unwrap();
        let split = polynomial_unit_integral(&p1, 2.0).sqrt();
        assert!((split - p1.l2_unit_norm()).abs() < 1e-12 * split);
    }
}
