//! Expected exit time of `dX = b(X) dt + ε dW` from an interval, by
//! quadrature of the closed-form Green's function solution.
//!
//! With `B(y) = ∫_0^y b`, `β = 2B/ε²` and the scale function
//! `s(y) = ∫ e^{-β}`, the solution of `b u' + (ε²/2) u'' = -1`,
//! `u(l) = u(r) = 0`, is
//!
//! ```text
//! u(x) = (2/ε²) [ (s(r)-s(x))/S · ∫_l^x (s(y)-s(l)) e^{β(y)} dy
//!               + (s(x)-s(l))/S · ∫_x^r (s(r)-s(y)) e^{β(y)} dy ],
//! ```
//!
//! `S = s(r) - s(l)`. For small `ε` the factors `e^{±β}` span thousands of
//! orders of magnitude, so every quantity is carried as a logarithm and
//! the differences `s(y)-s(l)` and `s(r)-s(y)` are accumulated separately
//! from either end to avoid cancellation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::Domain;
use crate::drift::DriftField;
use crate::point::Point;
use crate::quad::gauss_legendre8;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleError {
    NotOneDimensional,
    OutsideDomain(f64),
    InvalidParameter(String),
    /// The result's logarithm exceeded the `f64` range.
    Overflow,
    NonFinite,
}

impl core::error::Error for OracleError {}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::NotOneDimensional => write!(f, "quadrature oracle needs a 1D drift and interval"),
            OracleError::OutsideDomain(x) => write!(f, "start point {x} is not inside the interval"),
            OracleError::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            OracleError::Overflow => write!(f, "expected exit time overflows f64"),
            OracleError::NonFinite => write!(f, "drift produced a non-finite value"),
        }
    }
}

/// Largest log-magnitude of a returned value.
const MAX_LOG: f64 = 700.0;

fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + libm::log1p(libm::exp(-(a - b).abs()))
}

/// `log` of Simpson's rule on a panel of width `w` with log-values
/// `a, m, c` at the ends and midpoint.
fn log_simpson(w: f64, a: f64, m: f64, c: f64) -> f64 {
    libm::log(w / 6.0) + lse(lse(a, m + libm::log(4.0)), c)
}

/// Expected exit time from `x` for the 1D drift `field` on `domain`, using
/// about `n_quad` Simpson panels.
pub fn expected_exit_oracle_1d(field: &DriftField, domain: &Domain, x: f64, epsilon: f64, n_quad: usize) -> Result<f64, OracleError> {
    Ok(expected_exit_profile_1d(field, domain, &[x], epsilon, n_quad)?[0])
}

/// [`expected_exit_oracle_1d`] at each of `xs`, sharing one quadrature
/// grid: the cost is `O(n_quad + xs.len())`.
pub fn expected_exit_profile_1d(field: &DriftField, domain: &Domain, xs: &[f64], epsilon: f64, n_quad: usize) -> Result<Vec<f64>, OracleError> {
    let (l, r) = match domain {
        Domain::Interval { l, r } if field.dim() == 1 => (*l, *r),
        _ => return Err(OracleError::NotOneDimensional),
    };
    if let Some(&x) = xs.iter().find(|&&x| !(x > l && x < r)) {
        return Err(OracleError::OutsideDomain(x));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OracleError::InvalidParameter(alloc::format!("epsilon = {epsilon}")));
    }
    if n_quad < 4 {
        return Err(OracleError::InvalidParameter(alloc::format!("n_quad = {n_quad}")));
    }

    // Panel edges: every x and the origin are edges; gaps are subdivided
    // to panels of width at most (r - l)/n_quad.
    let mut cuts: Vec<f64> = Vec::with_capacity(xs.len() + 3);
    cuts.extend_from_slice(&[l, r]);
    cuts.extend_from_slice(xs);
    if 0.0 > l && 0.0 < r {
        cuts.push(0.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = alloc::vec![l];
    for w in cuts.windows(2) {
        let k = libm::ceil((n_quad as f64) * (w[1] - w[0]) / (r - l)).max(1.0) as usize;
        for j in 1..=k {
            edges.push(if j == k { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / k as f64 });
        }
    }
    let log_u = log_profile(field, &edges, epsilon)?;
    xs.iter()
        .map(|&x| {
            let k = edges.binary_search_by(|e| e.total_cmp(&x)).expect("x is a panel edge");
            let lu = log_u[k];
            if lu > MAX_LOG {
                Err(OracleError::Overflow)
            } else if lu.is_nan() {
                Err(OracleError::NonFinite)
            } else {
                Ok(libm::exp(lu))
            }
        })
        .collect()
}

/// `log u` at every panel edge.
fn log_profile(field: &DriftField, edges: &[f64], epsilon: f64) -> Result<Vec<f64>, OracleError> {
    let panels = edges.len() - 1;
    // Evaluation points: each panel contributes its left edge and three
    // interior quarter points.
    let mut pts = Vec::with_capacity(4 * panels + 1);
    for p in 0..panels {
        let (a, b) = (edges[p], edges[p + 1]);
        for q in 0..4 {
            pts.push(a + (b - a) * q as f64 / 4.0);
        }
    }
    pts.push(edges[panels]);

    // β at every point, accumulated outward from the origin (or from the
    // left end if the origin is not an edge).
    let scale = 2.0 / (epsilon * epsilon);
    let b = |y: f64| {
        let v = field.eval(&Point::scalar(y))[0];
        v.is_finite().then_some(v)
    };
    let anchor = pts.iter().position(|&p| p == 0.0).unwrap_or(0);
    let mut beta = alloc::vec![0.0; pts.len()];
    if pts[anchor] != 0.0 {
        beta[anchor] = scale * gauss_legendre8(0.0, pts[anchor], b).ok_or(OracleError::NonFinite)?;
    }
    for i in anchor + 1..pts.len() {
        beta[i] = beta[i - 1] + scale * gauss_legendre8(pts[i - 1], pts[i], b).ok_or(OracleError::NonFinite)?;
    }
    for i in (0..anchor).rev() {
        beta[i] = beta[i + 1] - scale * gauss_legendre8(pts[i], pts[i + 1], b).ok_or(OracleError::NonFinite)?;
    }

    // log of ∫ e^{-β} over the left (side 0) or right (side 1) half panel.
    let half = |p: usize, side: usize| {
        let i = 4 * p + 2 * side;
        log_simpson(pts[i + 2] - pts[i], -beta[i], -beta[i + 1], -beta[i + 2])
    };
    // log(s(y) - s(l)) at panel edges and midpoints, from the left.
    let mut la_edge = alloc::vec![f64::NEG_INFINITY; panels + 1];
    let mut la_mid = alloc::vec![f64::NEG_INFINITY; panels];
    for p in 0..panels {
        la_mid[p] = lse(la_edge[p], half(p, 0));
        la_edge[p + 1] = lse(la_mid[p], half(p, 1));
    }
    // log(s(r) - s(y)) from the right.
    let mut lb_edge = alloc::vec![f64::NEG_INFINITY; panels + 1];
    let mut lb_mid = alloc::vec![f64::NEG_INFINITY; panels];
    for p in (0..panels).rev() {
        lb_mid[p] = lse(lb_edge[p + 1], half(p, 1));
        lb_edge[p] = lse(lb_mid[p], half(p, 0));
    }
    let log_s = la_edge[panels];

    let be = |k: usize| beta[4 * k];
    let bm = |p: usize| beta[4 * p + 2];
    // log ∫_l^{e_k} (s - s(l)) e^β and log ∫_{e_k}^r (s(r) - s) e^β.
    let mut left = alloc::vec![f64::NEG_INFINITY; panels + 1];
    for p in 0..panels {
        let w = edges[p + 1] - edges[p];
        left[p + 1] = lse(left[p], log_simpson(w, la_edge[p] + be(p), la_mid[p] + bm(p), la_edge[p + 1] + be(p + 1)));
    }
    let mut right = alloc::vec![f64::NEG_INFINITY; panels + 1];
    for p in (0..panels).rev() {
        let w = edges[p + 1] - edges[p];
        right[p] = lse(right[p + 1], log_simpson(w, lb_edge[p] + be(p), lb_mid[p] + bm(p), lb_edge[p + 1] + be(p + 1)));
    }
    let log_scale = libm::log(scale);
    Ok((0..=panels)
        .map(|k| log_scale + lse(lb_edge[k] - log_s + left[k], la_edge[k] - log_s + right[k]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::registry_get;
    use crate::hjb::{solve_hjb2, Hjb2Options};

    #[test]
    fn pure_diffusion_closed_form() {
        let d = Domain::interval(-1.0, 2.0).unwrap();
        let zero = registry_get("zero", &[]).unwrap();
        for &(x, eps) in &[(0.0, 1.0), (1.5, 0.5), (-0.9, 2.0)] {
            let u = expected_exit_oracle_1d(&zero, &d, x, eps, 200).unwrap();
            let exact = (x + 1.0) * (2.0 - x) / (eps * eps);
            assert!((u - exact).abs() < 1e-12 * exact.max(1.0), "{u} vs {exact}");
        }
    }

    #[test]
    fn brownian_midpoint_values() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let zero = registry_get("zero", &[]).unwrap();
        let u = expected_exit_oracle_1d(&zero, &d, 0.0, core::f64::consts::SQRT_2, 100).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
        let u = expected_exit_oracle_1d(&zero, &d, 0.0, 1.0, 100).unwrap();
        assert!((u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_drift_gives_even_profile() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = registry_get("ex1-sqrt", &[]).unwrap();
        let xs = [-0.7, -0.2, 0.2, 0.7];
        let u = expected_exit_profile_1d(&f, &d, &xs, 0.15, 4000).unwrap();
        assert!((u[0] - u[3]).abs() < 1e-9 && (u[1] - u[2]).abs() < 1e-9);
        assert!(u[1] > u[0]);
    }

    #[test]
    fn agrees_with_finite_differences() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = registry_get("ex1-sqrt", &[]).unwrap();
        let eps = 0.2;
        let g = solve_hjb2(
            &f,
            &d,
            &Hjb2Options {
                h: 2e-4,
                epsilon: eps,
                ..Hjb2Options::default()
            },
        )
        .unwrap();
        for x in [-0.5, 0.0, 0.3] {
            let u = expected_exit_oracle_1d(&f, &d, x, eps, 4000).unwrap();
            let v = g.value_near(&Point::scalar(x)).unwrap();
            assert!((u - v).abs() < 2e-3, "{x}: {u} vs {v}");
        }
    }

    #[test]
    fn small_noise_stays_finite() {
        let d = Domain::interval(-0.5625, 0.0625).unwrap();
        let f = registry_get("ex2-asym", &[]).unwrap();
        let u = expected_exit_oracle_1d(&f, &d, 0.0, 0.01, 20_000).unwrap();
        // Independent trapezoid evaluation with 4·10⁵ points gave 0.4751.
        assert!((u - 0.4751).abs() < 1e-3, "{u}");
    }

    #[test]
    fn regression_symmetric_example() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = registry_get("ex1-sqrt", &[]).unwrap();
        let u = expected_exit_oracle_1d(&f, &d, 0.0, 0.1, 20_000).unwrap();
        // Independent trapezoid value 0.9044; frozen at the first run.
        assert!((u - 0.9044).abs() < 1e-3, "{u}");
        assert!((u - 0.904414885067977).abs() < 1e-12, "{u}");
    }

    #[test]
    fn rejects_bad_input() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = registry_get("ex1-sqrt", &[]).unwrap();
        assert!(matches!(expected_exit_oracle_1d(&f, &d, 1.0, 0.1, 100), Err(OracleError::OutsideDomain(_))));
        assert!(matches!(expected_exit_oracle_1d(&f, &d, 0.0, 0.0, 100), Err(OracleError::InvalidParameter(_))));
        let f2 = registry_get("radial2d", &[]).unwrap();
        assert_eq!(expected_exit_oracle_1d(&f2, &d, 0.0, 0.1, 100), Err(OracleError::NotOneDimensional));
    }
}
