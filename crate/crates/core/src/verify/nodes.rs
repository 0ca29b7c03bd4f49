//! Quadrature nodes for integrals over all of `R^n`: a bounded core split at
//! special points (graded toward them) and far shells of doubling width whose
//! decay is extrapolated geometrically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::quadrature::gauss_legendre;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodePolicy {
    /// Geometric levels toward each special point.
    pub levels: usize,
    /// Gauss order per panel.
    pub order: usize,
    /// Far shells; shell `k` spans `[2^k - 1, 2^{k+1} - 1]` reach units past the core.
    pub shells: usize,
    /// 2-D: angles per circle.
    pub angles: usize,
}

impl Default for NodePolicy {
    fn default() -> Self {
        Self::for_dim(1)
    }
}

impl NodePolicy {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            1 => NodePolicy {
                levels: 8,
                order: 6,
                shells: 20,
                angles: 1,
            },
            _ => NodePolicy {
                levels: 3,
                order: 4,
                shells: 12,
                angles: 32,
            },
        }
    }

    pub fn refined(&self) -> Self {
        NodePolicy {
            levels: self.levels + 4,
            order: (2 * self.order).min(crate::quadrature::MAX_GAUSS_ORDER),
            shells: self.shells + 4,
            angles: 2 * self.angles,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > crate::quadrature::MAX_GAUSS_ORDER || self.shells < 2 || self.angles == 0 {
            return Err(Error::invalid("nodes", "need 1 <= order <= 32, at least 2 shells and 1 angle"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    pub x: Point,
    pub weight: f64,
    /// `(side, k)` for far-shell nodes; 2-D has a single side.
    pub shell: Option<(usize, usize)>,
}

fn push_gauss(out: &mut Vec<(f64, f64)>, a: f64, b: f64, order: usize) {
    let (x, w) = gauss_legendre(order);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    for (xi, wi) in x.iter().zip(w) {
        out.push((m + h * xi, wi * h));
    }
}

/// Gauss panels on `[a, b]`, geometrically refined toward the flagged ends.
fn graded(a: f64, b: f64, toward_a: bool, toward_b: bool, policy: &NodePolicy) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for (end, dir, grade) in [(a, 1.0, toward_a), (b, -1.0, toward_b)] {
        if !grade {
            let (u, v) = if dir > 0.0 { (a, mid) } else { (mid, b) };
            push_gauss(&mut out, u, v, policy.order);
            continue;
        }
        let mut outer = half;
        for _ in 0..policy.levels {
            let inner = 0.5 * outer;
            let (u, v) = (end + dir * inner, end + dir * outer);
            push_gauss(&mut out, u.min(v), u.max(v), policy.order);
            outer = inner;
        }
        let (u, v) = (end, end + dir * outer);
        push_gauss(&mut out, u.min(v), u.max(v), policy.order);
    }
    out
}

/// Nodes on the line: the hull of `special` split at every special point,
/// then shells of width `reach 2^k` on both sides.
pub(crate) fn line_nodes(special: &[f64], reach: f64, policy: &NodePolicy) -> Result<Vec<Node>> {
    policy.validate()?;
    if special.is_empty() || !(reach > 0.0 && reach.is_finite()) {
        return Err(Error::invalid("reach", "need special points and a positive reach"));
    }
    let mut pts = special.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|p, q| (*p - *q).abs() <= 1e-13 * (1.0 + q.abs()));
    let mut out = Vec::new();
    for w in pts.windows(2) {
        for (x, wt) in graded(w[0], w[1], true, true, policy) {
            out.push(Node {
                x: Point::scalar(x),
                weight: wt,
                shell: None,
            });
        }
    }
    let (lo, hi) = (pts[0], pts[pts.len() - 1]);
    for side in 0..2 {
        for k in 0..policy.shells {
            let near = reach * (2f64.powi(k as i32) - 1.0);
            let far = reach * (2f64.powi(k as i32 + 1) - 1.0);
            let (a, b) = if side == 0 { (hi + near, hi + far) } else { (lo - far, lo - near) };
            let panel = if k == 0 {
                graded(a, b, side == 0, side == 1, policy)
            } else {
                let mut v = Vec::new();
                push_gauss(&mut v, a, 0.5 * (a + b), policy.order);
                push_gauss(&mut v, 0.5 * (a + b), b, policy.order);
                v
            };
            out.extend(panel.into_iter().map(|(x, wt)| Node {
                x: Point::scalar(x),
                weight: wt,
                shell: Some((side, k)),
            }));
        }
    }
    Ok(out)
}

/// Polar nodes about `center`: the disc of radius `core` split at the special
/// radii, then annular shells of width `core 2^k`.
pub(crate) fn plane_nodes(center: &Point, special_radii: &[f64], core: f64, policy: &NodePolicy) -> Result<Vec<Node>> {
    policy.validate()?;
    if !(core > 0.0 && core.is_finite()) {
        return Err(Error::invalid("core", "must be positive"));
    }
    let mut radii: Vec<f64> = special_radii.iter().copied().filter(|r| *r > 0.0 && *r < core).collect();
    radii.push(0.0);
    radii.push(core);
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|p, q| (*p - *q).abs() <= 1e-13 * (1.0 + q.abs()));
    let dt = 2.0 * std::f64::consts::PI / policy.angles as f64;
    let mut out = Vec::new();
    let mut emit = |rho: f64, wr: f64, shell: Option<(usize, usize)>| {
        for j in 0..policy.angles {
            // half-step offset keeps nodes off the axes
            let th = (j as f64 + 0.5) * dt;
            out.push(Node {
                x: center.add(&Point::planar(rho * th.cos(), rho * th.sin())),
                weight: wr * rho * dt,
                shell,
            });
        }
    };
    for w in radii.windows(2) {
        for (rho, wr) in graded(w[0], w[1], true, true, policy) {
            emit(rho, wr, None);
        }
    }
    for k in 0..policy.shells {
        let a = core * 2f64.powi(k as i32);
        let mut v = Vec::new();
        push_gauss(&mut v, a, 2.0 * a, policy.order);
        for (rho, wr) in v {
            emit(rho, wr, Some((0, k)));
        }
    }
    Ok(out)
}

/// Geometric tail past the last shell of each side, from the ratio of the
/// last two shell sums; `inf` when the shells stop decaying.
pub(crate) fn extrapolate_tail(shell_sums: &[Vec<f64>]) -> f64 {
    let mut tail = 0.0;
    for sums in shell_sums {
        let k = sums.len();
        if k < 2 || sums[k - 1] == 0.0 {
            continue;
        }
        let rho = sums[k - 1] / sums[k - 2];
        if !(rho < 1.0) {
            return f64::INFINITY;
        }
        tail += sums[k - 1] * rho / (1.0 - rho);
    }
    tail
}

/// Core, shell and tail sums of `values` weighted by the nodes.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct NodeSums {
    pub core: f64,
    pub shells: f64,
    pub tail: f64,
}

pub(crate) fn sum_nodes(nodes: &[Node], values: &[f64], sides: usize, shells: usize) -> NodeSums {
    let mut core = 0.0;
    let mut per = vec![vec![0.0; shells]; sides];
    for (n, v) in nodes.iter().zip(values) {
        match n.shell {
            None => core += n.weight * v,
            Some((s, k)) => per[s][k] += n.weight * v,
        }
    }
    NodeSums {
        core,
        shells: per.iter().flatten().sum(),
        tail: extrapolate_tail(&per),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_nodes_integrate_decaying_powers() {
        let pol = NodePolicy::default();
        let nodes = line_nodes(&[-1.0, 0.0, 1.0], 1.0, &pol).unwrap();
        // ∫ (1 + x^2)^{-1} = π, ∫ |x|^{-1/2} e^{-|x|} = 2 Γ(1/2)
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let v: Vec<f64> = nodes.iter().map(|n| f(n.x.get(0))).collect();
        let s = sum_nodes(&nodes, &v, 2, pol.shells);
        assert!((s.core + s.shells + s.tail - std::f64::consts::PI).abs() < 1e-10, "{s:?}");
        let g = |x: f64| x.abs().powf(-0.5) * (-x.abs()).exp();
        let v: Vec<f64> = nodes.iter().map(|n| g(n.x.get(0))).collect();
        let s = sum_nodes(&nodes, &v, 2, pol.shells);
        let exact = 2.0 * std::f64::consts::PI.sqrt();
        let coarse = (s.core + s.shells + s.tail - exact).abs();
        assert!(coarse < 5e-3 * exact, "{s:?}");
        // grading toward the singularity pays off under refinement
        let fine = NodePolicy { levels: 16, ..pol };
        let nodes = line_nodes(&[-1.0, 0.0, 1.0], 1.0, &fine).unwrap();
        let v: Vec<f64> = nodes.iter().map(|n| g(n.x.get(0))).collect();
        let s = sum_nodes(&nodes, &v, 2, fine.shells);
        assert!((s.core + s.shells + s.tail - exact).abs() < 0.1 * coarse, "{s:?}");
    }

    #[test]
    fn slow_tails_extrapolate_and_divergent_ones_are_infinite() {
        let pol = NodePolicy::default();
        let nodes = line_nodes(&[0.0, 1.0], 1.0, &pol).unwrap();
        // ∫_{x > 1} x^{-3/2} = 2 beyond the core
        let f = |x: f64| if x > 1.0 { x.powf(-1.5) } else { 0.0 };
        let v: Vec<f64> = nodes.iter().map(|n| f(n.x.get(0))).collect();
        let s = sum_nodes(&nodes, &v, 2, pol.shells);
        assert!((s.shells + s.tail - 2.0).abs() < 1e-3, "{s:?}");
        let v: Vec<f64> = nodes.iter().map(|n| n.x.get(0).abs().max(1.0).powf(-0.9)).collect();
        assert!(sum_nodes(&nodes, &v, 2, pol.shells).tail.is_infinite());
    }

    #[test]
    fn plane_nodes_integrate_radial_functions() {
        let pol = NodePolicy::for_dim(2);
        let nodes = plane_nodes(&Point::planar(0.0, 0.0), &[0.5], 1.0, &pol).unwrap();
        // ∫ (1 + |x|^2)^{-2} = π
        let v: Vec<f64> = nodes.iter().map(|n| (1.0 + n.x.norm().powi(2)).powi(-2)).collect();
        let s = sum_nodes(&nodes, &v, 1, pol.shells);
        assert!((s.core + s.shells + s.tail - std::f64::consts::PI).abs() < 1e-5, "{s:?}");
    }
}
