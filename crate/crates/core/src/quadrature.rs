//! Cell-based quadrature over balls and boxes with explicit handling of
//! power-law and mild (logarithmic) point singularities.
//!
//! The domain is tiled by a uniform lattice of cells. Regular cells use the
//! configured [`CellRule`]. Cells close to a declared power singularity
//! `|y - c|^e` integrate that factor exactly over the cell and freeze the
//! remaining (regular) part of the integrand at the cell centre, which is the
//! product-integration form of the midpoint rule. Graded singularities are
//! handled by recursive dyadic subdivision toward the singular point.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Ball, Point};

/// Quadrature rule applied on cells away from singular points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "order")]
pub enum CellRule {
    Midpoint,
    /// Tensor Gauss-Legendre with the given number of nodes per axis.
    GaussLegendre(usize),
}

/// How cells containing a singular point are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityPolicy {
    /// Exact integral of the singular factor against the frozen regular part.
    AnalyticCell,
    /// Omit singular cells and halve the cell size until the change is below tolerance.
    ExcludeAndRefine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureScheme {
    /// Cells per radius of the integration ball (per half-width of a box).
    pub resolution: usize,
    pub rule: CellRule,
    pub policy: SingularityPolicy,
    /// Absolute tolerance, relative to `max(1, |value|)`.
    pub tolerance: f64,
}

pub const MIN_RESOLUTION: usize = 16;

impl QuadratureScheme {
    pub fn new(resolution: usize, rule: CellRule, policy: SingularityPolicy, tolerance: f64) -> Result<Self> {
        let q = QuadratureScheme {
            resolution,
            rule,
            policy,
            tolerance,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::invalid(
                "resolution",
                format!("must be at least {MIN_RESOLUTION}, got {}", self.resolution),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be finite and positive"));
        }
        if let CellRule::GaussLegendre(k) = self.rule {
            if !(1..=MAX_GAUSS_ORDER).contains(&k) {
                return Err(Error::invalid("rule", format!("Gauss-Legendre order must lie in 1..={MAX_GAUSS_ORDER}")));
            }
        }
        Ok(())
    }

    /// Composite midpoint with analytic singular cells; used for weight integrals.
    pub fn for_weights() -> Self {
        QuadratureScheme {
            resolution: 64,
            rule: CellRule::Midpoint,
            policy: SingularityPolicy::AnalyticCell,
            tolerance: 1e-6,
        }
    }

    /// Default operator lattice: 2^9 cells per radius in n = 1, 2^6 in n = 2.
    pub fn for_operators(dim: usize) -> Self {
        QuadratureScheme {
            resolution: if dim == 1 { 512 } else { 64 },
            rule: CellRule::GaussLegendre(3),
            policy: SingularityPolicy::AnalyticCell,
            tolerance: 1e-6,
        }
    }

    /// Same scheme with `resolution * factor`.
    pub fn refined(&self, factor: usize) -> Self {
        QuadratureScheme {
            resolution: self.resolution * factor,
            ..*self
        }
    }
}

/// A point singularity of an integrand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Singularity {
    /// Integrand behaves like `|y - center|^exponent` times a regular part.
    Power { center: Point, exponent: f64 },
    /// Integrable singularity without a power-law factorisation (e.g. logarithmic).
    Graded { center: Point },
}

impl Singularity {
    pub fn center(&self) -> Point {
        match *self {
            Singularity::Power { center, .. } | Singularity::Graded { center } => center,
        }
    }
}

pub trait Integrand: Sync {
    fn dim(&self) -> usize;

    /// Pointwise value. May be non-finite exactly at a singular point.
    fn value(&self, y: &Point) -> f64;

    fn singularities(&self) -> Vec<Singularity> {
        Vec::new()
    }

    /// Integrand divided by `|y - c_k|^{e_k}` for the `k`-th singularity,
    /// which must be a [`Singularity::Power`]. Finite near `c_k`.
    fn regular_part(&self, _k: usize, y: &Point) -> f64 {
        self.value(y)
    }
}

/// Adapter turning a closure into a regular integrand.
pub struct FnIntegrand<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Point) -> f64 + Sync> FnIntegrand<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnIntegrand { dim, f }
    }
}

impl<F: Fn(&Point) -> f64 + Sync> Integrand for FnIntegrand<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &Point) -> f64 {
        (self.f)(y)
    }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes

pub const MAX_GAUSS_ORDER: usize = 32;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=MAX_GAUSS_ORDER).map(compute_gauss_legendre).collect());
    &table[order.clamp(1, MAX_GAUSS_ORDER)]
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre on `[a, b]` with `panels` equal panels of `order` nodes.
pub fn gauss_panels<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, order: usize, mut f: F) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            s += wi * f(mid + half * xi);
        }
        total += s * half;
    }
    total
}

// ---------------------------------------------------------------------------
// Exact integrals of |y - c|^e over cells

fn power_primitive(t: f64, e: f64) -> f64 {
    if (e + 1.0).abs() < 1e-14 {
        t.ln()
    } else {
        t.powf(e + 1.0) / (e + 1.0)
    }
}

/// `∫_u^v |y - c|^e dy` for `u < v`.
pub fn power_integral_1d(u: f64, v: f64, c: f64, e: f64) -> f64 {
    let a = u - c;
    let b = v - c;
    if a >= 0.0 {
        if a == 0.0 && e <= -1.0 {
            return f64::INFINITY;
        }
        if a == 0.0 {
            return power_primitive(b, e);
        }
        power_primitive(b, e) - power_primitive(a, e)
    } else if b <= 0.0 {
        if b == 0.0 && e <= -1.0 {
            return f64::INFINITY;
        }
        if b == 0.0 {
            return power_primitive(-a, e);
        }
        power_primitive(-a, e) - power_primitive(-b, e)
    } else {
        if e <= -1.0 {
            return f64::INFINITY;
        }
        power_primitive(-a, e) + power_primitive(b, e)
    }
}

const PRODUCT_NODES: usize = 3;

/// `∫_a^b |t|^e t^l dt` for `e > -1`.
fn signed_power_moment(a: f64, b: f64, e: f64, l: usize) -> f64 {
    let p = e + l as f64 + 1.0;
    let pos = |lo: f64, hi: f64| (hi.powf(p) - lo.powf(p)) / p;
    let mut s = 0.0;
    if b > 0.0 {
        s += pos(a.max(0.0), b);
    }
    if a < 0.0 {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * pos((-b).max(0.0), -a);
    }
    s
}

/// `∫_u^v |y - c|^e (y - m)^j dy` for `j < PRODUCT_NODES`.
fn centered_power_moments(u: f64, v: f64, c: f64, e: f64, m: f64) -> [f64; PRODUCT_NODES] {
    let raw: Vec<f64> = (0..PRODUCT_NODES).map(|l| signed_power_moment(u - c, v - c, e, l)).collect();
    let delta = c - m;
    let mut out = [0.0; PRODUCT_NODES];
    for (j, o) in out.iter_mut().enumerate() {
        let mut binom = 1.0;
        for (l, r) in raw.iter().enumerate().take(j + 1) {
            *o += binom * delta.powi((j - l) as i32) * r;
            binom = binom * (j - l) as f64 / (l + 1) as f64;
        }
    }
    out
}

/// `∫_{s1}^{s2} (d^2 + s^2)^{e/2} ds` for `d > 0`, via `s = d sinh t`.
fn line_power_integral(d: f64, s1: f64, s2: f64, e: f64) -> f64 {
    let t1 = (s1 / d).asinh();
    let t2 = (s2 / d).asinh();
    let panels = (((t2 - t1).abs() / 0.5).ceil() as usize).max(1);
    let g = e + 1.0;
    let integral = gauss_panels(t1, t2, panels, 10, |t| t.cosh().powf(g));
    d.powf(e + 1.0) * integral
}

/// `∫_rect |y - c|^e dy` over the axis-aligned rectangle `[lo, hi]` in R^2,
/// via the divergence identity `div((y-c)|y-c|^e) = (e+2)|y-c|^e`.
pub fn power_integral_rect(lo: &Point, hi: &Point, c: &Point, e: f64) -> f64 {
    let (cx, cy) = (c.get(0), c.get(1));
    let scale = (hi.get(0) - lo.get(0)).abs() + (hi.get(1) - lo.get(1)).abs();
    // (signed distance of the edge line from c, s-range along the edge)
    let edges = [
        (cy - lo.get(1), lo.get(0) - cx, hi.get(0) - cx),
        (hi.get(0) - cx, lo.get(1) - cy, hi.get(1) - cy),
        (hi.get(1) - cy, lo.get(0) - cx, hi.get(0) - cx),
        (cx - lo.get(0), lo.get(1) - cy, hi.get(1) - cy),
    ];
    let mut total = 0.0;
    for (d, s1, s2) in edges {
        if d.abs() <= 1e-13 * scale {
            continue;
        }
        total += d * line_power_integral(d.abs(), s1, s2, e);
    }
    total / (e + 2.0)
}

/// `∫_cell |y - c|^e dy` for a 1-D or 2-D cell.
pub fn power_integral_cell(lo: &Point, hi: &Point, c: &Point, e: f64) -> f64 {
    match lo.dim() {
        1 => power_integral_1d(lo.get(0), hi.get(0), c.get(0), e),
        _ => power_integral_rect(lo, hi, c, e),
    }
}

// ---------------------------------------------------------------------------
// Engine

const GRADED_DEPTH: usize = 40;
const CLIP_DEPTH: usize = 10;
const BOUNDARY_ORDER: usize = 6;

struct Engine<'a, F: Integrand> {
    f: &'a F,
    sing: Vec<Singularity>,
    scheme: QuadratureScheme,
    dim: usize,
    near_factor: f64,
}

fn cell_contains(lo: &Point, hi: &Point, p: &Point) -> bool {
    (0..lo.dim()).all(|i| p.get(i) >= lo.get(i) && p.get(i) <= hi.get(i))
}

fn cell_center(lo: &Point, hi: &Point) -> Point {
    lo.add(hi).scale(0.5)
}

fn cell_volume(lo: &Point, hi: &Point) -> f64 {
    (0..lo.dim()).map(|i| hi.get(i) - lo.get(i)).product()
}

fn cell_size(lo: &Point, hi: &Point) -> f64 {
    (0..lo.dim()).map(|i| hi.get(i) - lo.get(i)).fold(0.0, f64::max)
}

impl<'a, F: Integrand> Engine<'a, F> {
    fn new(f: &'a F, scheme: &QuadratureScheme) -> Self {
        let dim = f.dim();
        Engine {
            f,
            sing: f.singularities(),
            scheme: *scheme,
            dim,
            near_factor: if dim == 1 { 4.0 } else { 2.0 },
        }
    }

    fn check_integrable(&self, in_domain: impl Fn(&Point) -> bool) -> Result<()> {
        for s in &self.sing {
            if let Singularity::Power { center, exponent } = s {
                if *exponent <= -(self.dim as f64) && in_domain(center) {
                    return Err(Error::NotIntegrable {
                        exponent: *exponent,
                        dim: self.dim,
                    });
                }
            }
        }
        Ok(())
    }

    fn regular_rule(&self, lo: &Point, hi: &Point) -> f64 {
        let vol = cell_volume(lo, hi);
        match self.scheme.rule {
            CellRule::Midpoint | CellRule::GaussLegendre(1) => vol * self.f.value(&cell_center(lo, hi)),
            CellRule::GaussLegendre(k) => self.gauss_cell(lo, hi, k, |y| self.f.value(y)),
        }
    }

    fn gauss_cell(&self, lo: &Point, hi: &Point, order: usize, g: impl Fn(&Point) -> f64) -> f64 {
        let (x, w) = gauss_legendre(order);
        let c = cell_center(lo, hi);
        let half: Vec<f64> = (0..self.dim).map(|i| 0.5 * (hi.get(i) - lo.get(i))).collect();
        let mut s = 0.0;
        match self.dim {
            1 => {
                for (xi, wi) in x.iter().zip(w) {
                    s += wi * g(&Point::scalar(c.get(0) + half[0] * xi));
                }
                s * half[0]
            }
            _ => {
                for (xi, wi) in x.iter().zip(w) {
                    for (yj, wj) in x.iter().zip(w) {
                        s += wi * wj * g(&Point::planar(c.get(0) + half[0] * xi, c.get(1) + half[1] * yj));
                    }
                }
                s * half[0] * half[1]
            }
        }
    }

    /// Regular part of singularity `k` frozen on the cell: the centre value,
    /// or the two-point Gauss mean when the centre itself is unusable.
    fn frozen_regular(&self, k: usize, lo: &Point, hi: &Point) -> f64 {
        let v = self.f.regular_part(k, &cell_center(lo, hi));
        if v.is_finite() {
            return v;
        }
        let vol = cell_volume(lo, hi);
        self.gauss_cell(lo, hi, 2, |y| self.f.regular_part(k, y)) / vol
    }

    /// `∫_u^v |y - c|^e g(y) dy` with `g` replaced by its quadratic interpolant
    /// at the three Gauss nodes of the cell. `None` if `g` is unusable there.
    fn product_rule_1d(&self, k: usize, u: f64, v: f64, c: f64, e: f64) -> Option<f64> {
        let m = 0.5 * (u + v);
        let half = 0.5 * (v - u);
        let (xi, _) = gauss_legendre(PRODUCT_NODES);
        let nodes: Vec<f64> = xi.iter().map(|x| half * x).collect();
        let mut g = [0.0; PRODUCT_NODES];
        for (gi, s) in g.iter_mut().zip(&nodes) {
            *gi = self.f.regular_part(k, &Point::scalar(m + s));
            if !gi.is_finite() {
                return None;
            }
        }
        let moments = centered_power_moments(u, v, c, e, m);
        let mut total = 0.0;
        for (i, gi) in g.iter().enumerate() {
            // coefficients of the Lagrange basis polynomial L_i(s)
            let mut coef = [0.0; PRODUCT_NODES];
            coef[0] = 1.0;
            let mut deg = 0;
            for (j, sj) in nodes.iter().enumerate() {
                if j == i {
                    continue;
                }
                let scale = 1.0 / (nodes[i] - sj);
                for d in (0..=deg + 1).rev() {
                    let shifted = if d > 0 { coef[d - 1] } else { 0.0 };
                    coef[d] = (shifted - sj * coef[d]) * scale;
                }
                deg += 1;
            }
            let w: f64 = coef.iter().zip(&moments).map(|(a, b)| a * b).sum();
            total += gi * w;
        }
        Some(total)
    }

    fn nearest_singularity(&self, lo: &Point, hi: &Point) -> Option<usize> {
        if self.sing.is_empty() {
            return None;
        }
        let c = cell_center(lo, hi);
        let limit = self.near_factor * cell_size(lo, hi);
        let mut best: Option<(usize, f64)> = None;
        for (k, s) in self.sing.iter().enumerate() {
            let center = s.center();
            let d = if cell_contains(lo, hi, &center) { 0.0 } else { c.dist(&center) };
            if d <= limit && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }

    fn cell(&self, lo: &Point, hi: &Point) -> f64 {
        let Some(k) = self.nearest_singularity(lo, hi) else {
            return self.regular_rule(lo, hi);
        };
        let contains = cell_contains(lo, hi, &self.sing[k].center());
        match (self.sing[k], self.scheme.policy) {
            (_, SingularityPolicy::ExcludeAndRefine) if contains => 0.0,
            (_, SingularityPolicy::ExcludeAndRefine) => self.regular_rule(lo, hi),
            (Singularity::Power { center, exponent }, SingularityPolicy::AnalyticCell) => {
                if exponent <= -(self.dim as f64) + 1e-12 {
                    // only reachable when the singular point lies outside the cell
                    return self.graded(lo, hi, &center, 0);
                }
                if self.dim == 1 {
                    if let Some(v) = self.product_rule_1d(k, lo.get(0), hi.get(0), center.get(0), exponent) {
                        return v;
                    }
                }
                let exact = power_integral_cell(lo, hi, &center, exponent);
                if exact == 0.0 {
                    return 0.0;
                }
                exact * self.frozen_regular(k, lo, hi)
            }
            (Singularity::Graded { center }, SingularityPolicy::AnalyticCell) => self.graded(lo, hi, &center, 0),
        }
    }

    /// Dyadic subdivision toward `center`; the innermost cell containing it is dropped.
    fn graded(&self, lo: &Point, hi: &Point, center: &Point, depth: usize) -> f64 {
        let size = cell_size(lo, hi);
        let c = cell_center(lo, hi);
        let near = cell_contains(lo, hi, center) || c.dist(center) <= 1.5 * size;
        if !near {
            return self.regular_rule(lo, hi);
        }
        if depth >= GRADED_DEPTH {
            if cell_contains(lo, hi, center) {
                return 0.0;
            }
            return self.regular_rule(lo, hi);
        }
        let mut total = 0.0;
        for (clo, chi) in split_cell(lo, hi) {
            total += self.graded(&clo, &chi, center, depth + 1);
        }
        total
    }

    fn sum_cells(&self, lo: &Point, hi: &Point, counts: [usize; 2], clip: Option<&Ball>) -> f64 {
        match self.dim {
            1 => {
                let (a, b) = (lo.get(0), hi.get(0));
                let n = counts[0];
                let h = (b - a) / n as f64;
                let mut total = 0.0;
                for i in 0..n {
                    let u = a + i as f64 * h;
                    let v = if i + 1 == n { b } else { u + h };
                    total += self.cell(&Point::scalar(u), &Point::scalar(v));
                }
                total
            }
            _ => {
                let hx = (hi.get(0) - lo.get(0)) / counts[0] as f64;
                let hy = (hi.get(1) - lo.get(1)) / counts[1] as f64;
                let mut total = 0.0;
                for i in 0..counts[0] {
                    for j in 0..counts[1] {
                        let clo = Point::planar(lo.get(0) + i as f64 * hx, lo.get(1) + j as f64 * hy);
                        let chi = Point::planar(clo.get(0) + hx, clo.get(1) + hy);
                        total += match clip {
                            None => self.cell(&clo, &chi),
                            Some(ball) => self.clipped_cell(&clo, &chi, ball),
                        };
                    }
                }
                total
            }
        }
    }

    fn clipped_cell(&self, lo: &Point, hi: &Point, ball: &Ball) -> f64 {
        self.clipped(lo, hi, ball, 0)
    }

    fn clipped(&self, lo: &Point, hi: &Point, ball: &Ball, depth: usize) -> f64 {
        let (cx, cy, r) = (ball.center.get(0), ball.center.get(1), ball.radius);
        let nx = cx.clamp(lo.get(0), hi.get(0));
        let ny = cy.clamp(lo.get(1), hi.get(1));
        if (nx - cx).hypot(ny - cy) > r {
            return 0.0;
        }
        let fx = (lo.get(0) - cx).abs().max((hi.get(0) - cx).abs());
        let fy = (lo.get(1) - cy).abs().max((hi.get(1) - cy).abs());
        if fx.hypot(fy) <= r {
            return self.cell(lo, hi);
        }
        // partial cell: refine toward nearby singular points, otherwise fit the boundary
        if let Some(k) = self.nearest_singularity(lo, hi) {
            if depth < CLIP_DEPTH {
                return split_cell(lo, hi)
                    .iter()
                    .map(|(a, b)| self.clipped(a, b, ball, depth + 1))
                    .sum();
            }
            if cell_contains(lo, hi, &self.sing[k].center()) {
                return 0.0;
            }
        }
        self.boundary_fitted(lo, hi, ball)
    }

    /// Tensor Gauss rule on the part of a cell inside a disc. The disc boundary
    /// is treated as a graph over the axis along which its slope is at most one,
    /// and the inner integral runs over the exact chord.
    fn boundary_fitted(&self, lo: &Point, hi: &Point, ball: &Ball) -> f64 {
        let (x, w) = gauss_legendre(BOUNDARY_ORDER);
        let c = cell_center(lo, hi);
        let (cx, cy, r) = (ball.center.get(0), ball.center.get(1), ball.radius);
        // outer axis `o`, inner axis `i`
        let (o, i) = if (c.get(0) - cx).abs() <= (c.get(1) - cy).abs() { (0, 1) } else { (1, 0) };
        let (oc, ic) = ([cx, cy][o], [cx, cy][i]);
        let (o0, o1) = (lo.get(o), hi.get(o));
        let (i0, i1) = (lo.get(i), hi.get(i));
        // split the outer range where the circle crosses the inner edges, so the
        // chord limits are smooth on every piece
        let mut breaks = vec![o0, o1];
        for edge in [i0, i1] {
            let d = r * r - (edge - ic) * (edge - ic);
            if d > 0.0 {
                for t in [oc - d.sqrt(), oc + d.sqrt()] {
                    if t > o0 && t < o1 {
                        breaks.push(t);
                    }
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for piece in breaks.windows(2) {
            let oh = 0.5 * (piece[1] - piece[0]);
            if oh <= 0.0 {
                continue;
            }
            let om = 0.5 * (piece[1] + piece[0]);
            let mut sum = 0.0;
            for (xo, wo) in x.iter().zip(w) {
                let t = om + oh * xo;
                let half = (r * r - (t - oc) * (t - oc)).max(0.0).sqrt();
                let a = i0.max(ic - half);
                let b = i1.min(ic + half);
                if b <= a {
                    continue;
                }
                let ih = 0.5 * (b - a);
                let im = 0.5 * (b + a);
                let mut inner = 0.0;
                for (xi, wi) in x.iter().zip(w) {
                    let mut p = Point::planar(0.0, 0.0);
                    p.set(o, t);
                    p.set(i, im + ih * xi);
                    inner += wi * self.f.value(&p);
                }
                sum += wo * inner * ih;
            }
            total += sum * oh;
        }
        total
    }
}

fn split_cell(lo: &Point, hi: &Point) -> Vec<(Point, Point)> {
    let m = cell_center(lo, hi);
    match lo.dim() {
        1 => vec![(*lo, m), (m, *hi)],
        _ => {
            let mut out = Vec::with_capacity(4);
            for (x0, x1) in [(lo.get(0), m.get(0)), (m.get(0), hi.get(0))] {
                for (y0, y1) in [(lo.get(1), m.get(1)), (m.get(1), hi.get(1))] {
                    out.push((Point::planar(x0, y0), Point::planar(x1, y1)));
                }
            }
            out
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite)
    }
}

fn with_policy(scheme: &QuadratureScheme, mut eval: impl FnMut(&QuadratureScheme) -> f64) -> Result<f64> {
    match scheme.policy {
        SingularityPolicy::AnalyticCell => finite(eval(scheme)),
        SingularityPolicy::ExcludeAndRefine => {
            let mut current = *scheme;
            let mut prev = finite(eval(&current))?;
            for _ in 0..6 {
                current = current.refined(2);
                let next = finite(eval(&current))?;
                let done = (next - prev).abs() <= scheme.tolerance * next.abs().max(1.0);
                prev = next;
                if done {
                    break;
                }
            }
            Ok(prev)
        }
    }
}

/// `∫_B f` over a ball (interval in n = 1, disc in n = 2).
pub fn integrate_ball<F: Integrand>(f: &F, ball: &Ball, scheme: &QuadratureScheme) -> Result<f64> {
    if f.dim() != ball.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: ball.dim(),
        });
    }
    let engine = Engine::new(f, scheme);
    engine.check_integrable(|c| ball.contains(c))?;
    let r = ball.radius;
    let lo = ball.center.offset(&unit_diagonal(f.dim()), -r);
    let hi = ball.center.offset(&unit_diagonal(f.dim()), r);
    with_policy(scheme, |q| {
        let e = Engine { scheme: *q, ..engine_clone(&engine) };
        let clip = if f.dim() == 2 { Some(ball) } else { None };
        e.sum_cells(&lo, &hi, [2 * q.resolution; 2], clip)
    })
}

/// `∫_lo^hi f` over an interval split into `cells` cells (n = 1).
pub fn integrate_interval<F: Integrand>(f: &F, lo: f64, hi: f64, cells: usize, scheme: &QuadratureScheme) -> Result<f64> {
    if f.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.dim(),
        });
    }
    if hi <= lo {
        return Ok(0.0);
    }
    let engine = Engine::new(f, scheme);
    engine.check_integrable(|c| c.get(0) >= lo && c.get(0) <= hi)?;
    let base = cells.max(1);
    with_policy(scheme, |q| {
        let e = Engine { scheme: *q, ..engine_clone(&engine) };
        let factor = q.resolution / scheme.resolution.max(1);
        e.sum_cells(&Point::scalar(lo), &Point::scalar(hi), [base * factor.max(1), 1], None)
    })
}

/// `∫_box f` over an axis-aligned box split into `cells[i]` cells along axis `i`.
pub fn integrate_box<F: Integrand>(f: &F, lo: &Point, hi: &Point, cells: [usize; 2], scheme: &QuadratureScheme) -> Result<f64> {
    if f.dim() != lo.dim() || f.dim() != hi.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: lo.dim(),
        });
    }
    let engine = Engine::new(f, scheme);
    engine.check_integrable(|c| cell_contains(lo, hi, c))?;
    with_policy(scheme, |q| {
        let e = Engine { scheme: *q, ..engine_clone(&engine) };
        let factor = q.resolution / scheme.resolution.max(1);
        let f = factor.max(1);
        e.sum_cells(lo, hi, [cells[0].max(1) * f, cells[1].max(1) * f], None)
    })
}

fn engine_clone<'a, F: Integrand>(e: &Engine<'a, F>) -> Engine<'a, F> {
    Engine {
        f: e.f,
        sing: e.sing.clone(),
        scheme: e.scheme,
        dim: e.dim,
        near_factor: e.near_factor,
    }
}

fn unit_diagonal(dim: usize) -> Point {
    match dim {
        1 => Point::scalar(1.0),
        _ => Point::planar(1.0, 1.0),
    }
}

/// Quadrature nodes of a ball with their weights, using the regular cell rule
/// only (no singularity treatment). Used for node-based surrogates such as
/// the essential infimum.
pub fn ball_nodes(ball: &Ball, scheme: &QuadratureScheme) -> Vec<Point> {
    let dim = ball.dim();
    let per_axis = 2 * scheme.resolution;
    let r = ball.radius;
    let h = 2.0 * r / per_axis as f64;
    let (x, _) = match scheme.rule {
        CellRule::Midpoint => gauss_legendre(1),
        CellRule::GaussLegendre(k) => gauss_legendre(k),
    };
    let mut out = Vec::new();
    match dim {
        1 => {
            let a = ball.center.get(0) - r;
            for i in 0..per_axis {
                let mid = a + (i as f64 + 0.5) * h;
                for xi in x {
                    out.push(Point::scalar(mid + 0.5 * h * xi));
                }
            }
        }
        _ => {
            let (ax, ay) = (ball.center.get(0) - r, ball.center.get(1) - r);
            for i in 0..per_axis {
                for j in 0..per_axis {
                    let (mx, my) = (ax + (i as f64 + 0.5) * h, ay + (j as f64 + 0.5) * h);
                    for xi in x {
                        for yj in x {
                            let p = Point::planar(mx + 0.5 * h * xi, my + 0.5 * h * yj);
                            if ball.contains(&p) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
