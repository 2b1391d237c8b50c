//! Deterministic paths of `x' = b(x)`: RK4 integration, the exit
//! functional `τ_K`, the leaving branches out of the equilibrium and the
//! exit-time function `V_K`.
//!
//! Away from the origin the drift is locally Lipschitz, so RK4 tracks the
//! unique local solution. At the origin itself RK4 would return the
//! constant path, hiding every other solution; branches leaving `0` are
//! instead seeded at `δ·u` for drift-aligned directions `u` and shifted in
//! time by the exact entry time `∫_0^δ ds / ⟨b(s u), u⟩` (finite exactly
//! when a solution can leave along `u`).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::Domain;
use crate::drift::{AnalyticLeaving, ClassifyRule, DriftField};
use crate::point::Point;
use crate::quad;
use crate::quasi;

/// Time-stamped trajectory of one ODE or SDE realisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    states: Vec<Point>,
    pub exit: Option<ExitRecord>,
}

/// `τ_K` of a path together with the crossing point on `∂K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitRecord {
    pub time: f64,
    pub point: Point,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OdeError {
    InvalidStep { step: f64, horizon: f64 },
    /// RK4 from an equilibrium returns the constant path; use
    /// [`enumerate_leaving`] instead.
    AmbiguousOrigin,
    NotInDomain(Point),
    /// Nothing reached `∂K` before the horizon; carries the largest
    /// oriented distance reached (the closest approach to the boundary).
    NoExit { deepest: f64 },
    DimensionMismatch { expected: usize, found: usize },
    NonFinite { time: f64 },
    InvalidPath(&'static str),
}

impl core::error::Error for OdeError {}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::InvalidStep { step, horizon } => {
                write!(f, "step {step} must be positive and at most horizon/10 (horizon {horizon})")
            }
            OdeError::AmbiguousOrigin => write!(
                f,
                "x0 = 0 is an equilibrium with possibly many solutions; use enumerate_leaving"
            ),
            OdeError::NotInDomain(x) => write!(f, "point {x} is not in the domain"),
            OdeError::NoExit { deepest } => write!(
                f,
                "no exit within the horizon (largest oriented distance reached: {deepest}); increase the horizon"
            ),
            OdeError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            OdeError::NonFinite { time } => write!(f, "state became non-finite at t = {time}"),
            OdeError::InvalidPath(m) => write!(f, "invalid path: {m}"),
        }
    }
}

impl Path {
    /// Checks the invariants: at least two samples, strictly increasing
    /// times starting at 0, matching lengths and dimensions.
    pub fn new(times: Vec<f64>, states: Vec<Point>) -> Result<Self, OdeError> {
        if times.len() != states.len() {
            return Err(OdeError::InvalidPath("times and states differ in length"));
        }
        if times.len() < 2 {
            return Err(OdeError::InvalidPath("a path needs at least two samples"));
        }
        if times[0] != 0.0 {
            return Err(OdeError::InvalidPath("times must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(OdeError::InvalidPath("times must be strictly increasing"));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(OdeError::InvalidPath("states have mixed dimensions"));
        }
        Ok(Path {
            times,
            states,
            exit: None,
        })
    }

    /// Samples `f` at the given times.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> Point) -> Result<Self, OdeError> {
        let states = times.iter().map(|&t| f(t)).collect();
        Path::new(times, states)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Piecewise-linear state at time `t`, clamped to the sampled range.
    pub fn state_at(&self, t: f64) -> Point {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.states[0];
        }
        if i >= self.len() {
            return *self.states.last().unwrap();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.states[i - 1] * (1.0 - w) + self.states[i] * w
    }

    /// Same path with every state shifted by `v`.
    pub fn translated(&self, v: &Point) -> Path {
        Path {
            times: self.times.clone(),
            states: self.states.iter().map(|s| *s + *v).collect(),
            exit: None,
        }
    }
}

/// Uniform sample times `t0 + k·step` up to and including the first one
/// at or past `horizon`.
fn sample_times(t0: f64, horizon: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = libm::ceil((horizon - t0) / step - 1e-9).max(1.0) as usize;
    (0..=n).map(move |k| t0 + k as f64 * step)
}

#[inline]
pub fn rk4_step(field: &DriftField, x: &Point, h: f64) -> Point {
    let k1 = field.eval(x);
    let k2 = field.eval(&x.axpy(0.5 * h, &k1));
    let k3 = field.eval(&x.axpy(0.5 * h, &k2));
    let k4 = field.eval(&x.axpy(h, &k3));
    let incr = (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    *x + incr
}

/// RK4 from `(t0, x0)` until `horizon`, or until `stop` returns true for a
/// newly computed state (that state is kept).
fn integrate_from(
    field: &DriftField,
    prefix: (&[f64], &[Point]),
    x0: Point,
    t0: f64,
    horizon: f64,
    step: f64,
    mut stop: impl FnMut(&Point) -> bool,
) -> Result<Path, OdeError> {
    let mut times: Vec<f64> = prefix.0.to_vec();
    let mut states: Vec<Point> = prefix.1.to_vec();
    let mut x = x0;
    let mut ts = sample_times(t0, horizon, step);
    let t_first = ts.next().unwrap();
    times.push(t_first);
    states.push(x);
    let mut prev = t_first;
    for t in ts {
        x = advance(field, &x, t - prev);
        if !x.is_finite() {
            return Err(OdeError::NonFinite { time: t });
        }
        times.push(t);
        states.push(x);
        prev = t;
        if stop(&x) {
            break;
        }
    }
    Path::new(times, states)
}

/// RK4 over `dt`, substepped where `dt` is long against the local time
/// scale `|x|/|b(x)|`. Near a non-Lipschitz equilibrium that scale is of
/// the order of the elapsed time, so the first steps of a leaving branch
/// need refinement to keep the global error at the level of the outer step.
fn advance(field: &DriftField, x: &Point, dt: f64) -> Point {
    const FRACTION: f64 = 0.02;
    const MAX_SUBSTEPS: f64 = 4096.0;
    let speed = field.eval(x).norm();
    let scale = x.norm() / speed;
    let n = if speed > 0.0 && scale > 0.0 && scale.is_finite() {
        libm::ceil(dt / (FRACTION * scale)).clamp(1.0, MAX_SUBSTEPS) as usize
    } else {
        1
    };
    let h = dt / n as f64;
    let mut y = *x;
    for _ in 0..n {
        y = rk4_step(field, &y, h);
    }
    y
}

fn check_step(horizon: f64, step: f64) -> Result<(), OdeError> {
    if step > 0.0 && horizon > 0.0 && step <= horizon / 10.0 && step.is_finite() && horizon.is_finite() {
        Ok(())
    } else {
        Err(OdeError::InvalidStep { step, horizon })
    }
}

/// Classical RK4 trajectory from `x0 ≠ 0`, sampled at multiples of `step`.
pub fn integrate_ode(field: &DriftField, x0: &Point, horizon: f64, step: f64) -> Result<Path, OdeError> {
    check_step(horizon, step)?;
    if x0.dim() != field.dim() {
        return Err(OdeError::DimensionMismatch {
            expected: field.dim(),
            found: x0.dim(),
        });
    }
    if x0.is_origin() && field.eval(x0).is_origin() {
        return Err(OdeError::AmbiguousOrigin);
    }
    integrate_from(field, (&[], &[]), *x0, 0.0, horizon, step, |_| false)
}

/// First crossing of `∂K`.
///
/// Finds the first sample with `b_K ≥ 0`, interpolates `b_K` linearly over
/// the preceding interval to get the crossing time, and projects the
/// interpolated state onto `∂K`. `None` encodes `τ_K = +∞`.
pub fn exit_functional(path: &Path, domain: &Domain) -> Option<ExitRecord> {
    let times = path.times();
    let states = path.states();
    let mut prev = domain.oriented_distance(&states[0]);
    if prev >= 0.0 {
        return Some(ExitRecord {
            time: times[0],
            point: domain.project_to_boundary(&states[0]),
            label: None,
        });
    }
    for i in 1..states.len() {
        let d = domain.oriented_distance(&states[i]);
        if d >= 0.0 {
            let w = prev / (prev - d);
            let time = times[i - 1] + w * (times[i] - times[i - 1]);
            let x = states[i - 1] * (1.0 - w) + states[i] * w;
            return Some(ExitRecord {
                time,
                point: domain.project_to_boundary(&x),
                label: None,
            });
        }
        prev = d;
    }
    None
}

/// Time for a solution leaving the origin along `u` to reach `delta·u`,
/// `∫_0^δ ds / ⟨b(s u), u⟩`.
///
/// The integral is split into decades `[δ·10^{-j-1}, δ·10^{-j}]` and summed
/// with a geometric tail. Returns `None` when the drift does not point
/// outward along `u` or when the decade contributions stop shrinking (the
/// integral diverges, so no solution leaves along `u`).
pub fn entry_time(field: &DriftField, u: &Point, delta: f64) -> Option<f64> {
    const DECADES: usize = 14;
    let speed = |s: f64| field.eval(&(*u * s)).dot(u);
    let mut total = 0.0;
    let mut last = [0.0f64; 2];
    for j in 0..DECADES {
        let hi = delta * libm::pow(10.0, -(j as f64));
        let lo = hi * 0.1;
        // s = e^v, ds = s dv.
        let piece = quad::gauss_legendre8(libm::log(lo), libm::log(hi), |v| {
            let s = libm::exp(v);
            let g = speed(s);
            (g > 0.0).then(|| s / g)
        })?;
        total += piece;
        last = [last[1], piece];
    }
    let ratio = last[1] / last[0];
    if !(ratio < 0.95) {
        return None;
    }
    Some(total + last[1] * ratio / (1.0 - ratio))
}

/// One branch of the leaving solution set `LS(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeavingMember {
    pub label: String,
    pub path: Path,
    pub description: String,
    /// Seeding direction at the origin.
    pub direction: Point,
}

/// Leaving solutions from the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct LeavingSolutionSet {
    pub members: Vec<LeavingMember>,
    pub origin_field: String,
    pub rule: ClassifyRule,
    /// Set when no direction escapes.
    pub diagnostic: Option<String>,
}

/// Default seeding offset `1e-6 · diameter(K)`.
pub fn default_delta(domain: &Domain) -> f64 {
    1e-6 * domain.diameter()
}

/// Numerical `LS(0)`.
///
/// For each of `n_directions` quasi-uniform unit directions `u` with
/// `⟨b(δu), u⟩ > 0` and a finite entry time, integrates forward from `δu`
/// and prepends the origin at `t = 0`. Branches whose states at
/// `horizon/2` lie within `10·δ` of an earlier branch are merged. Members
/// close to a closed-form branch of the field get its label; the rest are
/// labelled `ray-k` (radial families) or `dir-k`.
pub fn enumerate_leaving(
    field: &DriftField,
    n_directions: usize,
    delta: f64,
    horizon: f64,
    step: f64,
) -> Result<LeavingSolutionSet, OdeError> {
    check_step(horizon, step)?;
    let dim = field.dim();
    let n = if dim == 1 { 2 } else { n_directions.max(2) };
    let mid = 0.5 * horizon;
    let mut members: Vec<LeavingMember> = Vec::new();
    let mut mids: Vec<Point> = Vec::new();
    let branches = match field.analytic() {
        AnalyticLeaving::Branches(b) => b.as_slice(),
        _ => &[],
    };
    let mut used = alloc::vec![false; branches.len()];
    for (k, u) in quasi::directions(dim, n).enumerate() {
        let seed = u * delta;
        if !(field.eval(&seed).dot(&u) > 0.0) {
            continue;
        }
        let Some(t0) = entry_time(field, &u, delta) else {
            continue;
        };
        if t0 >= mid {
            continue;
        }
        let origin = Point::zeros(dim);
        let path = integrate_from(field, (&[0.0], &[origin]), seed, t0, horizon, step, |_| false)?;
        let at_mid = path.state_at(mid);
        if mids.iter().any(|m| m.dist(&at_mid) < 10.0 * delta) {
            continue;
        }
        let matched = branches.iter().enumerate().find(|(i, b)| {
            let exact = b.state(mid);
            !used[*i] && exact.dist(&at_mid) <= 0.05 * exact.norm()
        });
        let (label, description) = match (matched, field.analytic()) {
            (Some((i, b)), _) => {
                used[i] = true;
                (b.label.clone(), b.description.clone())
            }
            (None, AnalyticLeaving::Rays { rate, power }) => (
                format!("ray-{k}"),
                format!("x(t) = ({rate}t)^{power} · {u}"),
            ),
            (None, _) => (format!("dir-{k}"), format!("numerical branch seeded along {u}")),
        };
        mids.push(at_mid);
        members.push(LeavingMember {
            label,
            path,
            description,
            direction: u,
        });
    }
    let diagnostic = members
        .is_empty()
        .then(|| format!("no direction escapes the origin for `{}`", field.identifier()));
    Ok(LeavingSolutionSet {
        members,
        origin_field: field.identifier(),
        rule: field.classify_rule(),
        diagnostic,
    })
}

impl LeavingSolutionSet {
    /// The closed-form branches of `field` sampled on `[0, horizon]`. Radial
    /// families are sampled along `n_rays` equally spaced directions.
    pub fn from_analytic(field: &DriftField, horizon: f64, step: f64, n_rays: usize) -> Result<Self, OdeError> {
        check_step(horizon, step)?;
        let times = || sample_times(0.0, horizon, step).collect::<Vec<_>>();
        let members = match field.analytic() {
            AnalyticLeaving::None => Vec::new(),
            AnalyticLeaving::Branches(bs) => bs
                .iter()
                .map(|b| {
                    Ok(LeavingMember {
                        label: b.label.clone(),
                        path: Path::from_fn(times(), |t| b.state(t))?,
                        description: b.description.clone(),
                        direction: b.signs.normalized().unwrap_or(b.signs),
                    })
                })
                .collect::<Result<Vec<_>, OdeError>>()?,
            AnalyticLeaving::Rays { rate, power } => quasi::directions(field.dim(), n_rays.max(1))
                .enumerate()
                .map(|(k, u)| {
                    let (rate, power) = (*rate, *power);
                    Ok(LeavingMember {
                        label: format!("ray-{k}"),
                        path: Path::from_fn(times(), move |t| u * libm::pow(rate * t, power))?,
                        description: format!("x(t) = ({rate}t)^{power} · {u}"),
                        direction: u,
                    })
                })
                .collect::<Result<Vec<_>, OdeError>>()?,
        };
        let diagnostic = members.is_empty().then(|| String::from("field has no closed-form leaving branches"));
        Ok(LeavingSolutionSet {
            members,
            origin_field: field.identifier(),
            rule: field.classify_rule(),
            diagnostic,
        })
    }

    /// Runs the exit functional on every member and stores the records.
    pub fn with_exits(mut self, domain: &Domain) -> Self {
        for m in &mut self.members {
            m.path.exit = exit_functional(&m.path, domain).map(|mut e| {
                e.label = Some(m.label.clone());
                e
            });
        }
        self
    }

    pub fn get(&self, label: &str) -> Option<&LeavingMember> {
        self.members.iter().find(|m| m.label == label)
    }

    /// Members reaching `∂K` at the minimal exit time (within `tol`):
    /// the optimal solution set `OS_K(0)`.
    pub fn optimal(&self, domain: &Domain, tol: f64) -> Vec<&LeavingMember> {
        let exits: Vec<Option<f64>> = self
            .members
            .iter()
            .map(|m| exit_functional(&m.path, domain).map(|e| e.time))
            .collect();
        let best = exits.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        self.members
            .iter()
            .zip(&exits)
            .filter(|(_, e)| matches!(e, Some(t) if *t <= best + tol))
            .map(|(m, _)| m)
            .collect()
    }
}

/// `V_K(x)`: the smallest exit time over solutions starting at `x`.
///
/// For `x ≠ 0` this is `τ_K` of the unique RK4 trajectory. At the origin
/// it is the minimum over the members of `leaving`; an empty leaving set
/// gives `+∞`.
pub fn exit_time_function(
    field: &DriftField,
    domain: &Domain,
    leaving: &LeavingSolutionSet,
    x: &Point,
    horizon: f64,
    step: f64,
) -> Result<f64, OdeError> {
    if x.dim() != domain.dim() {
        return Err(OdeError::DimensionMismatch {
            expected: domain.dim(),
            found: x.dim(),
        });
    }
    if !domain.contains(x) {
        return Err(OdeError::NotInDomain(*x));
    }
    if x.is_origin() && field.eval(x).is_origin() {
        if leaving.members.is_empty() {
            return Ok(f64::INFINITY);
        }
        let mut best = f64::INFINITY;
        let mut deepest = f64::NEG_INFINITY;
        for m in &leaving.members {
            match exit_functional(&m.path, domain) {
                Some(e) => best = best.min(e.time),
                None => {
                    for s in m.path.states() {
                        deepest = deepest.max(domain.oriented_distance(s));
                    }
                }
            }
        }
        return if best.is_finite() {
            Ok(best)
        } else {
            Err(OdeError::NoExit { deepest })
        };
    }
    check_step(horizon, step)?;
    let path = integrate_from(field, (&[], &[]), *x, 0.0, horizon, step, |s| {
        domain.oriented_distance(s) >= 0.0
    })?;
    match exit_functional(&path, domain) {
        Some(e) => Ok(e.time),
        None => Err(OdeError::NoExit {
            deepest: path
                .states()
                .iter()
                .map(|s| domain.oriented_distance(s))
                .fold(f64::NEG_INFINITY, f64::max),
        }),
    }
}
