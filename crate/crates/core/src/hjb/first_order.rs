//! Semi-Lagrangian fixed point for `⟨b, Du⟩ = -1`, `u = 0` on `∂K`.
//!
//! Each interior node `x` follows the drift direction `d = b(x)/|b(x)|` for
//! one cell, `y = x + h·d`, and sets
//!
//! ```text
//! u(x) ← T(x → y) + I[u](y),     T = ∫_0^h ds / ⟨b(x + s d), d⟩,
//! ```
//!
//! with `I` the multilinear interpolant. The travel time is integrated
//! along the segment after the substitution `s = h w²`, which stays exact
//! for drifts vanishing like `|x|^{1/2}`; if the segment leaves `K` first it
//! is cut at the exact boundary crossing, where `u = 0`. When the speed is
//! not positive along the segment the plain update `Δt = h / max(|b|, h)`,
//! `y = x + Δt·b(x)` is used. Nodes within `h` of the origin, where `b`
//! vanishes, take the minimum over all neighbouring lattice nodes of
//! `T(x → y) + u(y)`: the infimum over leaving characteristics.
//!
//! Lattice nodes outside `K` carry the linear extension
//! `-b_K(z)/⟨b(p), n(p)⟩` (`p` the boundary projection) so that
//! interpolation across `∂K` stays first-order accurate. Gauss–Seidel
//! sweeps alternate the traversal direction along every axis until the
//! largest update falls below `tol`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{GridField, HjbError};
use crate::domain::{check_h4, Domain};
use crate::drift::DriftField;
use crate::point::{Point, MAX_DIM};
use crate::quad;

#[derive(Clone, Debug, PartialEq)]
pub struct Hjb1Options {
    pub h: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Boundary samples for the transversality precondition.
    pub boundary_samples: usize,
}

impl Default for Hjb1Options {
    fn default() -> Self {
        Hjb1Options {
            h: 1e-3,
            tol: 1e-10,
            max_sweeps: 1000,
            boundary_samples: 256,
        }
    }
}

struct Ctx<'a> {
    field: &'a DriftField,
    domain: &'a Domain,
    grid: &'a GridField,
    h: f64,
}

impl Ctx<'_> {
    /// Time to move `len` along unit `dir` from `x`, cut at `∂K`.
    /// Returns `(time, reached_boundary)`.
    fn segment(&self, x: &Point, dir: &Point, len: f64) -> Option<(f64, bool)> {
        let (len, hit) = match self.domain.segment_exit(x, dir, len) {
            Some(s) => (s, true),
            None => (len, false),
        };
        let t = quad::travel_time(len, |s| self.field.eval(&x.axpy(s, dir)).dot(dir))?;
        Some((t, hit))
    }

    fn characteristic(&self, x: &Point, b: &Point, u: &[f64]) -> Option<f64> {
        let nb = b.norm();
        if nb > 0.0 {
            let d = *b * (1.0 / nb);
            if let Some((t, hit)) = self.segment(x, &d, self.h) {
                return if hit {
                    Some(t)
                } else {
                    self.grid.interpolate_with(&x.axpy(self.h, &d), u).map(|v| t + v)
                };
            }
        }
        let dt = self.h / nb.max(self.h);
        if nb > 0.0 {
            if let Some(s) = self.domain.segment_exit(x, b, dt) {
                return Some(s);
            }
        }
        self.grid.interpolate_with(&x.axpy(dt, b), u).map(|v| dt + v)
    }

    fn equilibrium(&self, node: usize, x: &Point, u: &[f64]) -> Option<f64> {
        let dim = self.grid.dim();
        let mut best: Option<f64> = None;
        let count = 3usize.pow(dim as u32);
        for code in 0..count {
            let mut off = [0i64; MAX_DIM];
            let mut c = code;
            for o in off.iter_mut().take(dim) {
                *o = (c % 3) as i64 - 1;
                c /= 3;
            }
            if off.iter().all(|&o| o == 0) {
                continue;
            }
            let Some(nb) = self.grid.neighbor(node, &off) else {
                continue;
            };
            let y = self.grid.node_point(nb);
            let v = y - *x;
            let len = v.norm();
            let dir = v * (1.0 / len);
            if let Some((t, hit)) = self.segment(x, &dir, len) {
                let cand = if hit { t } else { t + u[nb] };
                best = Some(best.map_or(cand, |b: f64| b.min(cand)));
            }
        }
        best
    }
}

/// Solves the first-order exit-time equation; see the module docs.
pub fn solve_hjb1(field: &DriftField, domain: &Domain, opts: &Hjb1Options) -> Result<GridField, HjbError> {
    if field.dim() != domain.dim() {
        return Err(HjbError::DimensionMismatch {
            expected: domain.dim(),
            found: field.dim(),
        });
    }
    if !(opts.tol > 0.0) || opts.max_sweeps == 0 {
        return Err(HjbError::InvalidOptions(alloc::format!("{opts:?}")));
    }
    let h4 = check_h4(domain, field, opts.boundary_samples).map_err(|e| HjbError::InvalidOptions(alloc::format!("{e}")))?;
    if !h4.passed {
        return Err(HjbError::Transversality(h4));
    }
    let mut grid = GridField::lattice(domain, opts.h)?;
    let dim = grid.dim();
    let n = grid.len();

    // Working array: interior values plus the fixed exterior extension.
    let mut u = alloc::vec![0.0; n];
    for node in 0..n {
        if !grid.is_interior(node) {
            let z = grid.node_point(node);
            let d = domain.oriented_distance(&z);
            u[node] = if d <= 0.0 {
                0.0
            } else {
                let p = domain.project_to_boundary(&z);
                let nrm = domain.exterior_gradient(&z).unwrap_or(Point::zeros(dim));
                let g = field.eval(&p).dot(&nrm);
                if g > 0.0 {
                    -d / g
                } else {
                    0.0
                }
            };
        }
    }
    let drift: Vec<Point> = (0..n).map(|k| field.eval(&grid.node_point(k))).collect();
    let interior: Vec<usize> = (0..n).filter(|&k| grid.is_interior(k)).collect();

    let ctx = Ctx {
        field,
        domain,
        grid: &grid,
        h: opts.h,
    };
    let mut last_update = alloc::vec![0.0; n];
    let mut sweeps = 0;
    let mut max_update = f64::INFINITY;
    let orderings = 1usize << dim;
    while sweeps < opts.max_sweeps {
        let flip = sweeps % orderings;
        max_update = 0.0;
        let order = SweepOrder::new(&grid, flip);
        for &node in interior.iter() {
            let node = order.map(node);
            let x = ctx.grid.node_point(node);
            let new = if x.norm() < opts.h {
                match (ctx.equilibrium(node, &x, &u), drift[node].norm() > 0.0) {
                    (Some(e), true) => ctx.characteristic(&x, &drift[node], &u).map_or(e, |c| c.min(e)),
                    (Some(e), false) => e,
                    (None, _) => ctx.characteristic(&x, &drift[node], &u).unwrap_or(f64::INFINITY),
                }
            } else {
                ctx.characteristic(&x, &drift[node], &u).unwrap_or(f64::INFINITY)
            };
            let delta = if new.is_finite() && u[node].is_finite() {
                (new - u[node]).abs()
            } else if new == u[node] {
                0.0
            } else {
                f64::INFINITY
            };
            last_update[node] = delta;
            max_update = max_update.max(delta);
            u[node] = new;
        }
        sweeps += 1;
        if max_update < opts.tol {
            break;
        }
    }
    if !(max_update < opts.tol) {
        let mut residual = grid.clone();
        for node in 0..n {
            if residual.is_interior(node) {
                residual.values[node] = last_update[node];
            }
        }
        return Err(HjbError::NonConvergence {
            sweeps,
            max_update,
            residual: Box::new(residual),
        });
    }
    for node in 0..n {
        if grid.is_interior(node) {
            if !u[node].is_finite() {
                return Err(HjbError::NonFinite(grid.node_point(node)));
            }
            grid.values[node] = u[node];
        }
    }
    grid.iterations = sweeps;
    grid.final_residual = max_update;
    grid.epsilon = None;
    Ok(grid)
}

/// Maps the position of a node in the natural order to the node visited at
/// that position when the axes flagged in `flip` are traversed backwards.
struct SweepOrder {
    shape: [usize; MAX_DIM],
    dim: usize,
    flip: usize,
}

impl SweepOrder {
    fn new(g: &GridField, flip: usize) -> Self {
        let mut shape = [1; MAX_DIM];
        shape[..g.dim()].copy_from_slice(g.shape());
        SweepOrder { shape, dim: g.dim(), flip }
    }

    #[inline]
    fn map(&self, node: usize) -> usize {
        if self.flip == 0 {
            return node;
        }
        let mut rest = node;
        let mut out = 0;
        let mut stride = 1;
        for a in 0..self.dim {
            let mut i = rest % self.shape[a];
            rest /= self.shape[a];
            if self.flip >> a & 1 == 1 {
                i = self.shape[a] - 1 - i;
            }
            out += i * stride;
            stride *= self.shape[a];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::registry_get;

    fn f(l: &str) -> DriftField {
        registry_get(l, &[]).unwrap()
    }

    fn opts(h: f64) -> Hjb1Options {
        Hjb1Options { h, ..Hjb1Options::default() }
    }

    #[test]
    fn asymmetric_example_narrow_domain() {
        let d = Domain::interval(-0.25, 0.25).unwrap();
        let g = solve_hjb1(&f("ex2-asym"), &d, &opts(1e-3)).unwrap();
        let v0 = g.value_near(&Point::scalar(0.0)).unwrap();
        assert!((v0 - 1.0 / 3.0).abs() < 2e-3, "{v0}");
        // Left-side limit and the jump to the right.
        let left = g.value_near(&Point::scalar(-1e-3)).unwrap();
        assert!((left - 1.0 / 3.0).abs() < 0.03);
        let right = g.value_near(&Point::scalar(1e-3)).unwrap();
        assert!(right > 0.9);
    }

    #[test]
    fn asymmetric_example_balanced_domain() {
        let r = 0.25;
        let d = Domain::interval(-9.0 * r / 4.0, r / 4.0).unwrap();
        let g = solve_hjb1(&f("ex2-asym"), &d, &opts(1e-3)).unwrap();
        let v0 = g.value_near(&Point::scalar(0.0)).unwrap();
        assert!((v0 - 0.5).abs() < 5e-3, "{v0}");
    }

    #[test]
    fn radial_exit_time_formula() {
        let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let g = solve_hjb1(&f("radial2d"), &d, &opts(5e-3)).unwrap();
        let mut worst: f64 = 0.0;
        for (p, v) in g.interior_nodes() {
            let r = p.norm();
            if (0.1..=0.9).contains(&r) {
                worst = worst.max((v - (1.0 - libm::sqrt(r))).abs());
            }
        }
        assert!(worst < 1e-2, "worst {worst}");
        let v0 = g.value_near(&Point::zeros(2)).unwrap();
        assert!((v0 - 1.0).abs() < 1e-2, "{v0}");
    }

    #[test]
    fn upwind_consistency_away_from_origin() {
        // |⟨b, D⁺u⟩ + 1| ≤ C·h with one-sided differences along sign(b).
        let d = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let field = f("radial2d");
        for (h, c) in [(1e-2, 20.0), (5e-3, 20.0)] {
            let g = solve_hjb1(&field, &d, &opts(h)).unwrap();
            let mut worst: f64 = 0.0;
            for node in 0..g.len() {
                if !g.is_interior(node) {
                    continue;
                }
                let x = g.node_point(node);
                if !(0.2..=0.8).contains(&x.norm()) {
                    continue;
                }
                let b = field.eval(&x);
                let mut dot = 0.0;
                let mut ok = true;
                for a in 0..2 {
                    let s = if b[a] >= 0.0 { 1 } else { -1 };
                    match g.neighbor(node, &super::super::axis_offset(2, a, s)) {
                        Some(nb) if g.is_interior(nb) => {
                            dot += b[a] * (g.values[nb] - g.values[node]) * s as f64 / h;
                        }
                        _ => ok = false,
                    }
                }
                if ok {
                    worst = worst.max((dot + 1.0).abs());
                }
            }
            assert!(worst <= c * h, "h={h}: {worst}");
        }
    }

    #[test]
    fn dirichlet_attained_linearly() {
        // Near x = r the exit time is (r - x)/b(r) to first order.
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let g = solve_hjb1(&f("ex1-sqrt"), &d, &opts(1e-3)).unwrap();
        for x in [0.999, 0.998, 0.995] {
            let v = g.value_near(&Point::scalar(x)).unwrap();
            let exact = 1.0 - libm::sqrt(x);
            let linear = (1.0 - x) / 2.0;
            assert!((v - exact).abs() < 1e-9);
            assert!((v - linear).abs() < 2.0 * (1.0 - x) * (1.0 - x));
        }
    }

    #[test]
    fn rejects_inward_drift() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        assert!(matches!(
            solve_hjb1(&f("linear"), &d, &opts(1e-2)),
            Err(HjbError::Transversality(_))
        ));
    }

    #[test]
    fn reports_non_convergence_with_residual_field() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let o = Hjb1Options {
            max_sweeps: 1,
            ..opts(1e-2)
        };
        match solve_hjb1(&f("ex1-sqrt"), &d, &o) {
            Err(HjbError::NonConvergence { sweeps, residual, .. }) => {
                assert_eq!(sweeps, 1);
                assert!(residual.interior_nodes().any(|(_, v)| v > 0.0));
            }
            other => panic!("{other:?}"),
        }
    }
}
