//! Compact exit domains `K` and their oriented distance `b_K`.
//!
//! `b_K(x)` is negative inside `K`, zero on `∂K` and positive outside; it is
//! exact for intervals, axis-aligned boxes and closed balls, and 1-Lipschitz.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::drift::{Assumption, AssumptionReport, DriftField};
use crate::ode::{exit_functional, LeavingSolutionSet};
use crate::point::{Point, MAX_DIM};
use crate::quasi;

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Interval { l: f64, r: f64 },
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainError {
    /// Geometry parameters do not describe a nonempty compact set.
    Invalid(String),
    /// `0` must lie in the interior of `K`.
    OriginNotInterior,
    /// The query point is not on `∂K` within `tol_boundary`.
    NotOnBoundary { oriented_distance: f64 },
    /// The outward normal is not unique (box edge or corner).
    DegenerateBoundary(Point),
    DimensionMismatch { expected: usize, found: usize },
    /// A leaving branch never reached `∂K` within its sampled horizon.
    NoExit { label: String },
}

impl core::error::Error for DomainError {}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::Invalid(m) => write!(f, "invalid domain: {m}"),
            DomainError::OriginNotInterior => write!(f, "the origin must lie in the interior of the domain"),
            DomainError::NotOnBoundary { oriented_distance } => {
                write!(f, "point is not on the boundary (oriented distance {oriented_distance})")
            }
            DomainError::DegenerateBoundary(p) => {
                write!(f, "outward normal is not unique at box edge/corner {p}")
            }
            DomainError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: domain has dim {expected}, got {found}")
            }
            DomainError::NoExit { label } => {
                write!(f, "leaving solution `{label}` never exits the domain within its horizon")
            }
        }
    }
}

impl Domain {
    pub fn interval(l: f64, r: f64) -> Result<Self, DomainError> {
        if !(l.is_finite() && r.is_finite() && l < r) {
            return Err(DomainError::Invalid(format!("interval [{l}, {r}]")));
        }
        Domain::Interval { l, r }.validated()
    }

    pub fn cube(lo: Point, hi: Point) -> Result<Self, DomainError> {
        if lo.dim() != hi.dim() {
            return Err(DomainError::DimensionMismatch {
                expected: lo.dim(),
                found: hi.dim(),
            });
        }
        for i in 0..lo.dim() {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] < hi[i]) {
                return Err(DomainError::Invalid(format!("box side {i}: [{}, {}]", lo[i], hi[i])));
            }
        }
        Domain::Box { lo, hi }.validated()
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self, DomainError> {
        if !(radius.is_finite() && radius > 0.0 && center.is_finite()) {
            return Err(DomainError::Invalid(format!("ball radius {radius}")));
        }
        Domain::Ball { center, radius }.validated()
    }

    fn validated(self) -> Result<Self, DomainError> {
        if self.oriented_distance(&Point::zeros(self.dim())) < 0.0 {
            Ok(self)
        } else {
            Err(DomainError::OriginNotInterior)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { lo, .. } => lo.dim(),
            Domain::Ball { center, .. } => center.dim(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { l, r } => r - l,
            Domain::Box { lo, hi } => hi.dist(lo),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Tolerance for boundary membership tests, `1e-9 · diameter`.
    pub fn tol_boundary(&self) -> f64 {
        1e-9 * self.diameter()
    }

    /// `max_{x ∈ K} |x|`.
    pub fn max_norm(&self) -> f64 {
        match self {
            Domain::Interval { l, r } => l.abs().max(r.abs()),
            Domain::Box { lo, hi } => {
                let mut s = 0.0;
                for i in 0..lo.dim() {
                    let m = lo[i].abs().max(hi[i].abs());
                    s += m * m;
                }
                libm::sqrt(s)
            }
            Domain::Ball { center, radius } => center.norm() + radius,
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Interval { l, r } => (Point::scalar(*l), Point::scalar(*r)),
            Domain::Box { lo, hi } => (*lo, *hi),
            Domain::Ball { center, radius } => (
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            ),
        }
    }

    #[inline]
    pub fn oriented_distance(&self, x: &Point) -> f64 {
        match self {
            Domain::Interval { l, r } => {
                let v = x[0];
                (l - v).max(v - r)
            }
            Domain::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::INFINITY;
                for i in 0..lo.dim() {
                    let below = lo[i] - x[i];
                    let above = x[i] - hi[i];
                    let e = below.max(above);
                    if e > 0.0 {
                        outside += e * e;
                    }
                    inside = inside.min(-e);
                }
                if outside > 0.0 {
                    libm::sqrt(outside)
                } else {
                    -inside
                }
            }
            Domain::Ball { center, radius } => x.dist(center) - radius,
        }
    }

    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        self.oriented_distance(x) <= 0.0
    }

    #[inline]
    pub fn is_interior(&self, x: &Point) -> bool {
        self.oriented_distance(x) < 0.0
    }

    pub fn on_boundary(&self, x: &Point) -> bool {
        self.oriented_distance(x).abs() <= self.tol_boundary()
    }

    /// Unit outward normal at a boundary point.
    pub fn outward_normal(&self, x: &Point) -> Result<Point, DomainError> {
        let d = self.oriented_distance(x);
        if d.abs() > self.tol_boundary() {
            return Err(DomainError::NotOnBoundary { oriented_distance: d });
        }
        match self {
            Domain::Interval { l, r } => Ok(Point::scalar(if (x[0] - l).abs() <= (x[0] - r).abs() {
                -1.0
            } else {
                1.0
            })),
            Domain::Box { lo, hi } => {
                let tol = self.tol_boundary();
                let mut normal = None;
                let mut active = 0;
                for i in 0..lo.dim() {
                    if (x[i] - lo[i]).abs() <= tol {
                        active += 1;
                        normal = Some(-Point::basis(lo.dim(), i));
                    }
                    if (x[i] - hi[i]).abs() <= tol {
                        active += 1;
                        normal = Some(Point::basis(lo.dim(), i));
                    }
                }
                match (active, normal) {
                    (1, Some(n)) => Ok(n),
                    _ => Err(DomainError::DegenerateBoundary(*x)),
                }
            }
            Domain::Ball { center, .. } => {
                (*x - *center).normalized().ok_or(DomainError::DegenerateBoundary(*x))
            }
        }
    }

    /// Nearest point of `∂K`.
    pub fn project_to_boundary(&self, x: &Point) -> Point {
        match self {
            Domain::Interval { l, r } => {
                Point::scalar(if (x[0] - l).abs() <= (x[0] - r).abs() { *l } else { *r })
            }
            Domain::Box { lo, hi } => {
                if self.oriented_distance(x) > 0.0 {
                    let mut p = *x;
                    for i in 0..lo.dim() {
                        p[i] = p[i].clamp(lo[i], hi[i]);
                    }
                    p
                } else {
                    // Push the nearest face coordinate out to the face.
                    let mut best = (f64::INFINITY, 0, 0.0);
                    for i in 0..lo.dim() {
                        for face in [lo[i], hi[i]] {
                            let d = (x[i] - face).abs();
                            if d < best.0 {
                                best = (d, i, face);
                            }
                        }
                    }
                    let mut p = *x;
                    p[best.1] = best.2;
                    p
                }
            }
            Domain::Ball { center, radius } => {
                let v = *x - *center;
                match v.normalized() {
                    Some(u) => center.axpy(*radius, &u),
                    None => center.axpy(*radius, &Point::basis(center.dim(), 0)),
                }
            }
        }
    }

    /// Gradient of `b_K` at an exterior point (unit vector away from `K`).
    pub fn exterior_gradient(&self, x: &Point) -> Option<Point> {
        match self {
            Domain::Ball { center, .. } => (*x - *center).normalized(),
            _ => (*x - self.project_to_boundary(x)).normalized(),
        }
    }

    /// Smallest `s ∈ (0, len]` with `b_K(x + s·dir) ≥ 0` for an interior
    /// `x`, or `None` if the segment stays inside.
    pub fn segment_exit(&self, x: &Point, dir: &Point, len: f64) -> Option<f64> {
        let end = x.axpy(len, dir);
        if self.oriented_distance(&end) < 0.0 {
            return None;
        }
        if let Domain::Ball { center, radius } = self {
            // |x - c + s·dir|² = r²  ⇒  s² |dir|² + 2 s ⟨v, dir⟩ + |v|² - r² = 0.
            let v = *x - *center;
            let a = dir.norm_sq();
            let b = v.dot(dir);
            let c = v.norm_sq() - radius * radius;
            let disc = (b * b - a * c).max(0.0);
            let s = (-b + libm::sqrt(disc)) / a;
            return Some(s.clamp(0.0, len));
        }
        let (mut a, mut b) = (0.0, len);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.oriented_distance(&x.axpy(m, dir)) >= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        Some(b)
    }

    /// `n` deterministic boundary points avoiding box edges and corners.
    pub fn sample_boundary(&self, n: usize) -> Vec<Point> {
        let n = n.max(1);
        match self {
            Domain::Interval { l, r } => (0..n.max(2))
                .map(|k| Point::scalar(if k % 2 == 0 { *l } else { *r }))
                .collect(),
            Domain::Ball { center, radius } => {
                let dim = center.dim();
                let count = if dim == 1 { n.max(2) } else { n };
                quasi::directions(dim, count)
                    .map(|u| center.axpy(*radius, &u))
                    .collect()
            }
            Domain::Box { lo, hi } => {
                let dim = lo.dim();
                let faces = 2 * dim;
                (0..n.max(faces))
                    .map(|k| {
                        let face = k % faces;
                        let axis = face / 2;
                        let j = (k / faces + 1) as u64;
                        let mut p = Point::zeros(dim);
                        let mut base_idx = 0;
                        const BASES: [u64; MAX_DIM] = [2, 3, 5];
                        for i in 0..dim {
                            if i == axis {
                                p[i] = if face % 2 == 0 { lo[i] } else { hi[i] };
                            } else {
                                // Interior of the face: keep away from the edges.
                                let u = 0.01 + 0.98 * quasi::halton(j, BASES[base_idx]);
                                base_idx += 1;
                                p[i] = lo[i] + u * (hi[i] - lo[i]);
                            }
                        }
                        p
                    })
                    .collect()
            }
        }
    }
}

/// Outward transversality: min over boundary samples of `⟨b(x), n(x)⟩`.
pub fn check_h4(domain: &Domain, field: &DriftField, n_boundary_samples: usize) -> Result<AssumptionReport, DomainError> {
    if domain.dim() != field.dim() {
        return Err(DomainError::DimensionMismatch {
            expected: domain.dim(),
            found: field.dim(),
        });
    }
    let mut min = f64::INFINITY;
    let mut witness = None;
    let samples = domain.sample_boundary(n_boundary_samples);
    for x in &samples {
        let n = domain.outward_normal(x)?;
        let v = field.eval(x).dot(&n);
        if v < min {
            min = v;
            witness = Some(*x);
        }
    }
    Ok(AssumptionReport {
        assumption: Assumption::H4,
        passed: min > 0.0,
        statistic: min,
        witness,
        detail: format!("min <b, n> = {min} over {} boundary samples", samples.len()),
    })
}

/// Common hitting time: the spread `max - min` of the branches' exit times.
pub fn check_h3(domain: &Domain, leaving: &LeavingSolutionSet, tol: f64) -> Result<AssumptionReport, DomainError> {
    if leaving.members.is_empty() {
        return Err(DomainError::Invalid(String::from("leaving set is empty")));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut witness = None;
    for m in &leaving.members {
        let e = exit_functional(&m.path, domain).ok_or_else(|| DomainError::NoExit {
            label: m.label.clone(),
        })?;
        if e.time < lo {
            lo = e.time;
            witness = Some(e.point);
        }
        hi = hi.max(e.time);
    }
    let spread = hi - lo;
    Ok(AssumptionReport {
        assumption: Assumption::H3,
        passed: spread <= tol,
        statistic: spread,
        witness,
        detail: format!("exit times in [{lo}, {hi}] over {} branches", leaving.members.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::registry_get;
    use crate::rng::NoiseStream;
    use proptest::prelude::*;

    fn iv(l: f64, r: f64) -> Domain {
        Domain::interval(l, r).unwrap()
    }

    #[test]
    fn oriented_distance_examples() {
        assert_eq!(iv(-1.0, 1.0).oriented_distance(&Point::scalar(0.0)), -1.0);
        let b = Domain::ball(Point::zeros(2), 1.0).unwrap();
        assert_eq!(b.oriented_distance(&Point::new(&[2.0, 0.0])), 1.0);
        assert_eq!(iv(-2.25, 0.25).oriented_distance(&Point::scalar(0.0)), -0.25);
        let bx = Domain::cube(Point::new(&[-1.0, -2.0]), Point::new(&[3.0, 1.0])).unwrap();
        assert_eq!(bx.oriented_distance(&Point::new(&[0.0, 0.0])), -1.0);
        assert_eq!(bx.oriented_distance(&Point::new(&[6.0, 5.0])), 5.0);
    }

    #[test]
    fn origin_must_be_interior() {
        assert_eq!(Domain::interval(0.0, 1.0), Err(DomainError::OriginNotInterior));
        assert!(Domain::ball(Point::new(&[2.0, 0.0]), 1.0).is_err());
        assert!(Domain::interval(1.0, -1.0).is_err());
    }

    #[test]
    fn normals() {
        assert_eq!(iv(-1.0, 1.0).outward_normal(&Point::scalar(1.0)).unwrap()[0], 1.0);
        let b = Domain::ball(Point::zeros(2), 1.0).unwrap();
        assert_eq!(b.outward_normal(&Point::new(&[0.0, 1.0])).unwrap().as_slice(), &[0.0, 1.0]);
        let r = 0.25;
        let d = iv(-9.0 * r / 4.0, r / 4.0);
        assert_eq!(d.outward_normal(&Point::scalar(-9.0 * r / 4.0)).unwrap()[0], -1.0);
        assert!(matches!(
            iv(-1.0, 1.0).outward_normal(&Point::scalar(0.5)),
            Err(DomainError::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn box_corner_is_degenerate() {
        let bx = Domain::cube(Point::new(&[-1.0, -1.0]), Point::new(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            bx.outward_normal(&Point::new(&[1.0, 1.0])),
            Err(DomainError::DegenerateBoundary(_))
        ));
        assert_eq!(bx.outward_normal(&Point::new(&[1.0, 0.3])).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn h4_examples() {
        let r = check_h4(&iv(-1.0, 1.0), &registry_get("ex1-sqrt", &[]).unwrap(), 10).unwrap();
        assert!(r.passed);
        assert_eq!(r.statistic, 2.0);
        let r = check_h4(&iv(-0.25, 0.25), &registry_get("ex2-asym", &[]).unwrap(), 10).unwrap();
        assert!(r.passed);
        assert_eq!(r.statistic, 0.5);
        assert_eq!(r.witness.unwrap()[0], 0.25);
        let r = check_h4(&iv(-1.0, 1.0), &registry_get("linear", &[]).unwrap(), 10).unwrap();
        assert!(!r.passed);
        let bad = check_h4(&iv(-1.0, 1.0), &registry_get("prod2d", &[]).unwrap(), 10);
        assert!(matches!(bad, Err(DomainError::DimensionMismatch { .. })));
    }

    #[test]
    fn h4_on_ball_and_box() {
        let b = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let r = check_h4(&b, &registry_get("radial2d", &[]).unwrap(), 64).unwrap();
        assert!(r.passed);
        assert!((r.statistic - 2.0).abs() < 1e-12);
        let bx = Domain::cube(Point::new(&[-1.0, -1.0]), Point::new(&[1.0, 1.0])).unwrap();
        assert!(check_h4(&bx, &registry_get("prod2d", &[]).unwrap(), 40).unwrap().passed);
    }

    #[test]
    fn lipschitz_over_random_pairs() {
        let s = NoiseStream::new(11, 0);
        let doms = [
            iv(-9.0 / 4.0, 0.25),
            Domain::ball(Point::new(&[0.1, -0.2]), 1.0).unwrap(),
            Domain::cube(Point::new(&[-1.0, -0.5]), Point::new(&[0.5, 2.0])).unwrap(),
        ];
        for d in &doms {
            let dim = d.dim();
            for k in 0..10_000u64 {
                let mut x = Point::zeros(dim);
                let mut y = Point::zeros(dim);
                for i in 0..dim {
                    x[i] = 6.0 * s.uniform(4 * k * 3 + i as u64) - 3.0;
                    y[i] = 6.0 * s.uniform((4 * k + 2) * 3 + i as u64) - 3.0;
                }
                let diff = (d.oriented_distance(&x) - d.oriented_distance(&y)).abs();
                assert!(diff <= x.dist(&y) + 1e-12);
            }
        }
    }

    #[test]
    fn normal_consistency() {
        let h = 1e-6;
        let doms = [
            iv(-9.0 / 4.0, 0.25),
            Domain::ball(Point::zeros(2), 1.0).unwrap(),
            Domain::cube(Point::new(&[-1.0, -0.5]), Point::new(&[0.5, 2.0])).unwrap(),
        ];
        for d in &doms {
            for x in d.sample_boundary(32) {
                let n = d.outward_normal(&x).unwrap();
                assert!(d.oriented_distance(&x.axpy(h, &n)) > 0.0);
                assert!(d.oriented_distance(&x.axpy(-h, &n)) < 0.0);
            }
        }
    }

    #[test]
    fn segment_exit_finds_crossing() {
        let d = iv(-1.0, 0.3);
        let s = d.segment_exit(&Point::scalar(0.25), &Point::scalar(1.0), 0.1).unwrap();
        assert!((s - 0.05).abs() < 1e-12);
        let b = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let s = b.segment_exit(&Point::new(&[0.9, 0.0]), &Point::new(&[1.0, 0.0]), 0.5).unwrap();
        assert!((s - 0.1).abs() < 1e-12);
        assert!(b.segment_exit(&Point::zeros(2), &Point::new(&[1.0, 0.0]), 0.5).is_none());
    }

    proptest! {
        #[test]
        fn sign_convention(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let b = Domain::ball(Point::zeros(2), 1.0).unwrap();
            let p = Point::new(&[x, y]);
            let d = b.oriented_distance(&p);
            let r = p.norm();
            prop_assert_eq!(d < 0.0, r < 1.0);
            prop_assert_eq!(d > 0.0, r > 1.0);
        }

        #[test]
        fn projection_lands_on_boundary(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let doms = [
                Domain::ball(Point::zeros(2), 1.0).unwrap(),
                Domain::cube(Point::new(&[-1.0, -0.5]), Point::new(&[0.5, 2.0])).unwrap(),
            ];
            for d in &doms {
                let p = d.project_to_boundary(&Point::new(&[x, y]));
                prop_assert!(d.oriented_distance(&p).abs() <= 1e-12);
            }
        }
    }
}
