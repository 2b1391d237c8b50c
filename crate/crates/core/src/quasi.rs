//! Deterministic low-discrepancy samples used by the assumption checks.

use core::f64::consts::PI;

use crate::point::Point;

/// Radical inverse of `index` in `base` (van der Corput / Halton coordinate).
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / base as f64;
    while index > 0 {
        f *= inv;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `n` quasi-uniform unit directions in `R^dim`.
///
/// In 1D these are `+1` and `-1` alternately, in 2D equally spaced angles
/// `2πk/n` starting at the positive first axis, and in 3D a Fibonacci
/// lattice on the sphere.
pub fn directions(dim: usize, n: usize) -> impl Iterator<Item = Point> {
    (0..n).map(move |k| match dim {
        1 => Point::scalar(if k % 2 == 0 { 1.0 } else { -1.0 }),
        2 => {
            let a = 2.0 * PI * k as f64 / n as f64;
            Point::new(&[libm::cos(a), libm::sin(a)])
        }
        _ => {
            let golden = PI * (3.0 - libm::sqrt(5.0));
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let rho = libm::sqrt((1.0 - z * z).max(0.0));
            let a = golden * k as f64;
            Point::new(&[rho * libm::cos(a), rho * libm::sin(a), z])
        }
    })
}

/// Direction parameterised by a point of the unit cube (Halton coordinates).
pub fn direction_from_unit(dim: usize, u: f64, v: f64) -> Point {
    match dim {
        1 => Point::scalar(if u < 0.5 { -1.0 } else { 1.0 }),
        2 => {
            let a = 2.0 * PI * u;
            Point::new(&[libm::cos(a), libm::sin(a)])
        }
        _ => {
            let z = 1.0 - 2.0 * v;
            let rho = libm::sqrt((1.0 - z * z).max(0.0));
            let a = 2.0 * PI * u;
            Point::new(&[rho * libm::cos(a), rho * libm::sin(a), z])
        }
    }
}

/// `n` quasi-random points with `r_min <= |x| <= r_max`.
pub fn shell_points(dim: usize, r_min: f64, r_max: f64, n: usize) -> impl Iterator<Item = Point> {
    (1..=n as u64).map(move |i| {
        let rho = r_min + (r_max - r_min) * halton(i, 2);
        direction_from_unit(dim, halton(i, 3), halton(i, 5)) * rho
    })
}
