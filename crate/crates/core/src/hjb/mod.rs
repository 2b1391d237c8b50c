//! Grid solvers for the exit-time equations on `K`.
//!
//! * [`solve_hjb1`]: first-order `⟨b, Du⟩ = -1`, `u = 0` on `∂K`, whose
//!   solution along characteristics is the exit time `V_K`;
//! * [`solve_hjb2`]: second-order `⟨b, Du⟩ + (ε²/2)Δu = -1`, `u = 0` on
//!   `∂K`, whose solution is the expected exit time `E[θ^ε]`;
//! * [`expected_exit_oracle_1d`]: closed-form 1D solution of the
//!   second-order problem by quadrature, used as an independent check.
//!
//! The second-order equation is written with the sign that makes `u ≥ 0`
//! (Dynkin's formula); the generator form `L^ε u = 1` would give `-u`.
//!
//! All grids are lattices anchored at the origin, `x = i·h`, restricted to
//! the strict interior of `K`; the boundary is handled at its exact
//! position along grid lines or characteristics.

mod first_order;
mod oracle;
mod second_order;

pub use first_order::{solve_hjb1, Hjb1Options};
pub use oracle::{expected_exit_oracle_1d, expected_exit_profile_1d, OracleError};
pub use second_order::{solve_hjb2, Hjb2Method, Hjb2Options};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::Domain;
use crate::drift::AssumptionReport;
use crate::point::{Point, MAX_DIM};

/// Largest lattice the solvers will allocate.
pub const MAX_NODES: usize = 50_000_000;

/// Scalar field on the origin-anchored lattice `h·Z^d` over `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub domain: Domain,
    pub h: f64,
    dim: usize,
    /// Integer coordinates of lattice node 0 along each axis.
    origin_index: [i64; MAX_DIM],
    shape: [usize; MAX_DIM],
    /// Node values; `NaN` at nodes outside the strict interior of `K`.
    pub values: Vec<f64>,
    interior: Vec<bool>,
    /// Dirichlet datum on `∂K`.
    pub boundary_value: f64,
    /// `None` for the first-order equation.
    pub epsilon: Option<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HjbError {
    InvalidOptions(String),
    DimensionMismatch { expected: usize, found: usize },
    TooManyNodes(usize),
    /// Transversality fails, so the boundary condition is not attained
    /// along the flow.
    Transversality(AssumptionReport),
    /// First-order sweeps did not settle; `residual` holds the last update
    /// magnitude at every node.
    NonConvergence {
        sweeps: usize,
        max_update: f64,
        residual: alloc::boxed::Box<GridField>,
    },
    /// Relaxation did not reach the residual tolerance.
    SorNonConvergence { iterations: usize, history: Vec<f64> },
    /// Some node has no finite exit time (no outward characteristic).
    NonFinite(Point),
}

impl core::error::Error for HjbError {}

impl fmt::Display for HjbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HjbError::InvalidOptions(m) => write!(f, "invalid solver options: {m}"),
            HjbError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: domain dim {expected}, field dim {found}")
            }
            HjbError::TooManyNodes(n) => write!(f, "grid would have {n} nodes (limit {MAX_NODES})"),
            HjbError::Transversality(r) => {
                write!(f, "drift is not outward on the boundary: {}", r.detail)
            }
            HjbError::NonConvergence { sweeps, max_update, .. } => {
                write!(f, "no convergence after {sweeps} sweeps (last max update {max_update})")
            }
            HjbError::SorNonConvergence { iterations, history } => write!(
                f,
                "relaxation did not converge in {iterations} iterations (last residual {:?})",
                history.last()
            ),
            HjbError::NonFinite(p) => write!(f, "no finite exit time at node {p}"),
        }
    }
}

impl GridField {
    /// Allocates the lattice covering `K` padded by one node on each side.
    pub(crate) fn lattice(domain: &Domain, h: f64) -> Result<Self, HjbError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(HjbError::InvalidOptions(alloc::format!("grid spacing {h}")));
        }
        let dim = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let mut origin_index = [0i64; MAX_DIM];
        let mut shape = [1usize; MAX_DIM];
        let mut total: usize = 1;
        for a in 0..dim {
            let i0 = libm::floor(lo[a] / h) as i64 - 1;
            let i1 = libm::ceil(hi[a] / h) as i64 + 1;
            origin_index[a] = i0;
            shape[a] = (i1 - i0 + 1) as usize;
            total = total.saturating_mul(shape[a]);
        }
        if total > MAX_NODES {
            return Err(HjbError::TooManyNodes(total));
        }
        let mut g = GridField {
            domain: domain.clone(),
            h,
            dim,
            origin_index,
            shape,
            values: alloc::vec![f64::NAN; total],
            interior: alloc::vec![false; total],
            boundary_value: 0.0,
            epsilon: None,
            iterations: 0,
            final_residual: 0.0,
            warnings: Vec::new(),
        };
        for n in 0..total {
            let x = g.node_point(n);
            if domain.is_interior(&x) {
                g.interior[n] = true;
                g.values[n] = 0.0;
            }
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior[node]
    }

    /// Multi-index of a flat node number (axis 0 varies fastest).
    pub fn multi_index(&self, mut node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in 0..self.dim {
            idx[a] = node % self.shape[a];
            node /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize; MAX_DIM]) -> usize {
        let mut n = 0;
        for a in (0..self.dim).rev() {
            n = n * self.shape[a] + idx[a];
        }
        n
    }

    /// Flat index of the node `offset` steps from `node`, if on the lattice.
    pub fn neighbor(&self, node: usize, offset: &[i64; MAX_DIM]) -> Option<usize> {
        let mut idx = self.multi_index(node);
        for a in 0..self.dim {
            let v = idx[a] as i64 + offset[a];
            if v < 0 || v >= self.shape[a] as i64 {
                return None;
            }
            idx[a] = v as usize;
        }
        Some(self.flat_index(&idx))
    }

    pub fn node_point(&self, node: usize) -> Point {
        let idx = self.multi_index(node);
        let mut p = Point::zeros(self.dim);
        for a in 0..self.dim {
            p[a] = (self.origin_index[a] + idx[a] as i64) as f64 * self.h;
        }
        p
    }

    /// Node nearest to `x` (clamped to the lattice).
    pub fn nearest_node(&self, x: &Point) -> usize {
        let mut idx = [0; MAX_DIM];
        for a in 0..self.dim {
            let i = libm::round(x[a] / self.h) as i64 - self.origin_index[a];
            idx[a] = i.clamp(0, self.shape[a] as i64 - 1) as usize;
        }
        self.flat_index(&idx)
    }

    /// Value at the nearest interior node, or `None` if that node is not
    /// interior.
    pub fn value_near(&self, x: &Point) -> Option<f64> {
        let n = self.nearest_node(x);
        self.interior[n].then(|| self.values[n])
    }

    /// Multilinear interpolation of `values` with `fill(node)` supplying
    /// values at non-interior corners.
    pub(crate) fn interpolate_with(&self, x: &Point, values: &[f64]) -> Option<f64> {
        let mut base = [0usize; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        for a in 0..self.dim {
            let s = x[a] / self.h - self.origin_index[a] as f64;
            let i = libm::floor(s);
            if i < 0.0 || i as usize + 1 >= self.shape[a] {
                return None;
            }
            base[a] = i as usize;
            w[a] = s - i;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut idx = base;
            let mut weight = 1.0;
            for a in 0..self.dim {
                if corner >> a & 1 == 1 {
                    idx[a] += 1;
                    weight *= w[a];
                } else {
                    weight *= 1.0 - w[a];
                }
            }
            if weight != 0.0 {
                acc += weight * values[self.flat_index(&idx)];
            }
        }
        Some(acc)
    }

    /// Multilinear interpolation of the solution, with the boundary value
    /// used at non-interior corners.
    pub fn interpolate(&self, x: &Point) -> Option<f64> {
        let filled: Vec<f64> = self
            .values
            .iter()
            .zip(&self.interior)
            .map(|(&v, &i)| if i { v } else { self.boundary_value })
            .collect();
        self.interpolate_with(x, &filled)
    }

    /// `(point, value)` for every interior node in lattice order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        (0..self.len())
            .filter(|&n| self.interior[n])
            .map(|n| (self.node_point(n), self.values[n]))
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }
}

/// Outward/inward lattice offsets along each axis.
pub(crate) fn axis_offset(dim: usize, axis: usize, sign: i64) -> [i64; MAX_DIM] {
    let mut o = [0i64; MAX_DIM];
    debug_assert!(axis < dim);
    o[axis] = sign;
    o
}
