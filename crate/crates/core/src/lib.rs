//! Numerical laboratory for zero-noise selection in non-Lipschitz ODEs.
//!
//! An autonomous ODE `x' = b(x)` with `b(0) = 0` and a drift that is only
//! Hölder continuous at the origin may leave the equilibrium along several
//! branches. Adding a vanishing Brownian perturbation `dX = b(X) dt + ε dW`
//! picks a law over those branches as `ε → 0`. This crate contains the
//! building blocks needed to observe that selection numerically:
//!
//! * [`drift`]: the drift fields and the registry of named examples,
//! * [`domain`]: compact exit domains with their oriented distance,
//! * [`ode`]: RK4 paths, the exit functional, leaving branches and `V_K`,
//! * [`sde`]: counter-based Euler–Maruyama ensembles with exit detection,
//! * [`hjb`]: first- and second-order exit-time equations on grids, and a
//!   closed-form quadrature oracle for one-dimensional expected exit times,
//! * [`experiments`]: selection laws, ε sweeps and goodness-of-fit checks.
//!
//! The crate is `no_std` and only needs `alloc`. Every transcendental goes
//! through `libm`, so results are bit-reproducible across platforms.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod domain;
pub mod drift;
pub mod experiments;
pub mod hjb;
pub mod ode;
pub mod point;
pub mod quad;
pub mod quasi;
pub mod rng;
pub mod sde;

pub use domain::{Domain, DomainError};
pub use drift::{registry_get, AssumptionReport, DriftField, RegistryError};
pub use ode::{ExitRecord, LeavingMember, LeavingSolutionSet, OdeError, Path};
pub use point::{Point, MAX_DIM};
pub use sde::{NoiseMode, SdeConfig, SdeError};
