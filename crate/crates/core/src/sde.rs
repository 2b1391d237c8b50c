//! Euler–Maruyama simulation of `dX = b(X) dt + ε dW` with exit detection.
//!
//! ```text
//! X_{k+1} = X_k + b(X_k)·Δt + ε·√Δt·Z_k
//! ```
//!
//! `Z_k` has independent standard normal coordinates in
//! [`NoiseMode::Independent`], or one normal shared by every coordinate in
//! [`NoiseMode::Common`]. Normal draw `j = k·m + i` (with `m` the number of
//! Brownian components, `i` the component) comes from
//! [`NoiseStream`](crate::rng::NoiseStream) keyed by `(master_seed, path_index)`.
//!
//! A path stops at the first `k` with `b_K(X_k) ≥ 0`. The exit time is
//! refined by interpolating `b_K` linearly over the crossing step, which
//! leaves an `O(Δt)` bias; paths still inside at the horizon are censored.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::Domain;
use crate::drift::DriftField;
use crate::ode::{ExitRecord, Path};
use crate::point::Point;
use crate::rng::NoiseStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    /// `d` independent Brownian components.
    Independent,
    /// A single Brownian component driving every coordinate.
    Common,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdeConfig {
    pub epsilon: f64,
    pub step: f64,
    pub horizon: f64,
    pub noise_mode: NoiseMode,
    pub master_seed: u64,
    pub record_stride: usize,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            epsilon: 0.01,
            step: 1e-4,
            horizon: 10.0,
            noise_mode: NoiseMode::Independent,
            master_seed: 0,
            record_stride: 1,
        }
    }
}

/// Default ε sweep.
pub const DEFAULT_EPSILONS: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

impl SdeConfig {
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        SdeConfig { epsilon, ..self.clone() }
    }

    /// Checks ranges and returns the number of steps up to the horizon.
    pub fn validate(&self) -> Result<usize, SdeError> {
        let ok = self.epsilon >= 0.0
            && self.epsilon.is_finite()
            && self.step > 0.0
            && self.horizon > 0.0
            && self.horizon.is_finite()
            && self.record_stride >= 1;
        if !ok {
            return Err(SdeError::InvalidConfig(format!("{self:?}")));
        }
        let n = libm::ceil(self.horizon / self.step - 1e-9);
        if n > (usize::MAX / 2) as f64 || n > 1e15 {
            return Err(SdeError::InvalidConfig(String::from("horizon/step is too large")));
        }
        Ok(n.max(1.0) as usize)
    }

    /// Soft limits; a violated one is reported but does not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let limit = (self.epsilon * self.epsilon).min(1e-2);
        if self.epsilon > 0.0 && self.step > limit {
            w.push(format!(
                "step {} exceeds min(eps^2, 1e-2) = {limit}; the diffusive layer is under-resolved",
                self.step
            ));
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SdeError {
    InvalidConfig(String),
    NotInDomain(Point),
    DimensionMismatch { expected: usize, found: usize },
    /// A path produced a non-finite state.
    NonFinite { path_index: u64, time: f64 },
}

impl core::error::Error for SdeError {}

impl fmt::Display for SdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SdeError::InvalidConfig(m) => write!(f, "invalid SDE configuration: {m}"),
            SdeError::NotInDomain(x) => write!(f, "initial point {x} is not in the domain"),
            SdeError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            SdeError::NonFinite { path_index, time } => {
                write!(f, "path {path_index} produced a non-finite state at t = {time}")
            }
        }
    }
}

fn check_inputs(field: &DriftField, domain: &Domain, x0: &Point) -> Result<(), SdeError> {
    for found in [domain.dim(), x0.dim()] {
        if found != field.dim() {
            return Err(SdeError::DimensionMismatch {
                expected: field.dim(),
                found,
            });
        }
    }
    if !domain.contains(x0) {
        return Err(SdeError::NotInDomain(*x0));
    }
    Ok(())
}

/// Core stepping loop shared by [`simulate_path`] and [`simulate_exit`].
/// `record(k, t, x)` sees every state including the final one.
fn run(
    field: &DriftField,
    domain: &Domain,
    cfg: &SdeConfig,
    n_steps: usize,
    path_index: u64,
    x0: &Point,
    mut record: impl FnMut(usize, f64, &Point),
) -> Result<Option<ExitRecord>, SdeError> {
    let dim = field.dim();
    let stream = NoiseStream::new(cfg.master_seed, path_index);
    let components = match cfg.noise_mode {
        NoiseMode::Independent => dim as u64,
        NoiseMode::Common => 1,
    };
    let noise_scale = cfg.epsilon * libm::sqrt(cfg.step);
    let mut x = *x0;
    let mut d_prev = domain.oriented_distance(&x);
    record(0, 0.0, &x);
    if d_prev >= 0.0 {
        return Ok(Some(ExitRecord {
            time: 0.0,
            point: domain.project_to_boundary(&x),
            label: None,
        }));
    }
    let mut cached = (u64::MAX, (0.0, 0.0));
    let mut draw = |j: u64| {
        if cached.0 != j / 2 {
            cached = (j / 2, stream.normal_pair(j / 2));
        }
        if j % 2 == 0 {
            cached.1 .0
        } else {
            cached.1 .1
        }
    };
    for k in 0..n_steps {
        let b = field.eval(&x);
        let mut next = x.axpy(cfg.step, &b);
        if noise_scale != 0.0 {
            let base = k as u64 * components;
            let shared = draw(base);
            for i in 0..dim {
                let z = if components == 1 || i == 0 { shared } else { draw(base + i as u64) };
                next[i] += noise_scale * z;
            }
        }
        let t = (k + 1) as f64 * cfg.step;
        if !next.is_finite() {
            return Err(SdeError::NonFinite { path_index, time: t });
        }
        let d = domain.oriented_distance(&next);
        record(k + 1, t, &next);
        if d >= 0.0 {
            let w = d_prev / (d_prev - d);
            let time = t - cfg.step + w * cfg.step;
            let cross = x * (1.0 - w) + next * w;
            return Ok(Some(ExitRecord {
                time,
                point: domain.project_to_boundary(&cross),
                label: None,
            }));
        }
        x = next;
        d_prev = d;
    }
    Ok(None)
}

/// One Euler–Maruyama path recording every `record_stride`-th state, plus
/// the first and the last.
pub fn simulate_path(
    field: &DriftField,
    domain: &Domain,
    cfg: &SdeConfig,
    path_index: u64,
    x0: &Point,
) -> Result<Path, SdeError> {
    let n = cfg.validate()?;
    check_inputs(field, domain, x0)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut last = (0usize, 0.0, *x0);
    let exit = run(field, domain, cfg, n, path_index, x0, |k, t, x| {
        if k % cfg.record_stride == 0 {
            times.push(t);
            states.push(*x);
        }
        last = (k, t, *x);
    })?;
    if last.0 % cfg.record_stride != 0 || times.len() < 2 {
        if times.len() < 2 && last.0 == 0 {
            // Started on the boundary: repeat the state one step later.
            times.push(cfg.step);
            states.push(last.2);
        } else {
            times.push(last.1);
            states.push(last.2);
        }
    }
    let mut path = Path::new(times, states).map_err(|e| SdeError::InvalidConfig(format!("{e}")))?;
    path.exit = exit;
    Ok(path)
}

/// Exit record of one path without storing its states.
pub fn simulate_exit(
    field: &DriftField,
    domain: &Domain,
    cfg: &SdeConfig,
    path_index: u64,
    x0: &Point,
) -> Result<Option<ExitRecord>, SdeError> {
    let n = cfg.validate()?;
    check_inputs(field, domain, x0)?;
    run(field, domain, cfg, n, path_index, x0, |_, _, _| {})
}

/// Exit of path `index`; `exit == None` means censored at the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOutcome {
    pub index: u64,
    pub exit: Option<ExitRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub n: usize,
    /// Mean over exited paths (`NaN` when every path is censored).
    pub mean_exit: f64,
    /// Sample standard deviation; `None` with fewer than two exits.
    pub sd: Option<f64>,
    /// 95% normal-approximation half-width; `None` with fewer than two exits.
    pub ci95: Option<f64>,
    pub censored_count: usize,
    pub epsilon: f64,
    pub step: f64,
    pub seed: u64,
}

impl EnsembleSummary {
    /// Folds outcomes in index order, so the result does not depend on
    /// how the paths were scheduled.
    pub fn from_outcomes(outcomes: &[PathOutcome], cfg: &SdeConfig) -> Self {
        let mut sorted: Vec<&PathOutcome> = outcomes.iter().collect();
        sorted.sort_by_key(|o| o.index);
        let times: Vec<f64> = sorted.iter().filter_map(|o| o.exit.as_ref().map(|e| e.time)).collect();
        let m = times.len();
        let mean = if m == 0 {
            f64::NAN
        } else {
            times.iter().sum::<f64>() / m as f64
        };
        let sd = (m >= 2).then(|| {
            let ss: f64 = times.iter().map(|t| (t - mean) * (t - mean)).sum();
            libm::sqrt(ss / (m - 1) as f64)
        });
        EnsembleSummary {
            n: outcomes.len(),
            mean_exit: mean,
            sd,
            ci95: sd.map(|s| 1.96 * s / libm::sqrt(m as f64)),
            censored_count: outcomes.len() - m,
            epsilon: cfg.epsilon,
            step: cfg.step,
            seed: cfg.master_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub outcomes: Vec<PathOutcome>,
    pub summary: EnsembleSummary,
}

impl Ensemble {
    pub fn from_outcomes(mut outcomes: Vec<PathOutcome>, cfg: &SdeConfig) -> Self {
        outcomes.sort_by_key(|o| o.index);
        let summary = EnsembleSummary::from_outcomes(&outcomes, cfg);
        Ensemble { outcomes, summary }
    }

    pub fn exits(&self) -> impl Iterator<Item = &ExitRecord> {
        self.outcomes.iter().filter_map(|o| o.exit.as_ref())
    }
}

/// Paths `0..n_paths`, run sequentially.
pub fn simulate_ensemble(
    field: &DriftField,
    domain: &Domain,
    cfg: &SdeConfig,
    n_paths: usize,
    x0: &Point,
) -> Result<Ensemble, SdeError> {
    if n_paths == 0 {
        return Err(SdeError::InvalidConfig(String::from("n_paths must be at least 1")));
    }
    let outcomes = (0..n_paths as u64)
        .map(|index| {
            simulate_exit(field, domain, cfg, index, x0).map(|exit| PathOutcome { index, exit })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::from_outcomes(outcomes, cfg))
}

/// Source of ensembles. The default runs sequentially; a multi-threaded
/// implementation must return outcomes for exactly the indices `0..n_paths`.
pub trait EnsembleRunner {
    fn run(
        &self,
        field: &DriftField,
        domain: &Domain,
        cfg: &SdeConfig,
        n_paths: usize,
        x0: &Point,
    ) -> Result<Ensemble, SdeError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl EnsembleRunner for Sequential {
    fn run(
        &self,
        field: &DriftField,
        domain: &Domain,
        cfg: &SdeConfig,
        n_paths: usize,
        x0: &Point,
    ) -> Result<Ensemble, SdeError> {
        simulate_ensemble(field, domain, cfg, n_paths, x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::registry_get;
    use crate::ode::{exit_functional, integrate_ode};

    fn f(l: &str) -> DriftField {
        registry_get(l, &[]).unwrap()
    }

    fn iv(l: f64, r: f64) -> Domain {
        Domain::interval(l, r).unwrap()
    }

    fn cfg(eps: f64) -> SdeConfig {
        SdeConfig {
            epsilon: eps,
            step: 1e-4,
            horizon: 5.0,
            ..SdeConfig::default()
        }
    }

    #[test]
    fn zero_noise_matches_ode_to_euler_order() {
        let fl = f("radial2d");
        let ball = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let x0 = Point::new(&[0.2, 0.1]);
        let ode = integrate_ode(&fl, &x0, 2.0, 1e-4).unwrap();
        let ode_exit = exit_functional(&ode, &ball).unwrap();
        let mut gaps = Vec::new();
        for step in [1e-3, 5e-4] {
            let c = SdeConfig {
                epsilon: 0.0,
                step,
                horizon: 2.0,
                ..SdeConfig::default()
            };
            let p = simulate_path(&fl, &ball, &c, 0, &x0).unwrap();
            gaps.push((p.exit.unwrap().time - ode_exit.time).abs());
        }
        assert!(gaps[0] < 5e-3, "{gaps:?}");
        assert!(gaps[1] < 0.7 * gaps[0], "{gaps:?}");
    }

    #[test]
    fn noise_forces_exit_from_equilibrium() {
        let p = simulate_path(&f("ex1-sqrt"), &iv(-1.0, 1.0), &cfg(0.01), 0, &Point::scalar(0.0)).unwrap();
        let e = p.exit.unwrap();
        assert!(e.point[0] == 1.0 || e.point[0] == -1.0);
        assert!(e.time > 0.5 && e.time < 1.5);
    }

    #[test]
    fn paths_are_bit_reproducible() {
        let a = simulate_path(&f("prod2d"), &Domain::ball(Point::zeros(2), 0.25).unwrap(), &cfg(0.05), 3, &Point::zeros(2)).unwrap();
        let b = simulate_path(&f("prod2d"), &Domain::ball(Point::zeros(2), 0.25).unwrap(), &cfg(0.05), 3, &Point::zeros(2)).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&f("prod2d"), &Domain::ball(Point::zeros(2), 0.25).unwrap(), &cfg(0.05), 4, &Point::zeros(2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stride_keeps_first_and_last() {
        let mut c = cfg(0.05);
        c.record_stride = 7;
        let full = simulate_path(&f("ex1-sqrt"), &iv(-1.0, 1.0), &cfg(0.05), 1, &Point::scalar(0.0)).unwrap();
        let thin = simulate_path(&f("ex1-sqrt"), &iv(-1.0, 1.0), &c, 1, &Point::scalar(0.0)).unwrap();
        assert_eq!(full.exit, thin.exit);
        assert_eq!(thin.states().last(), full.states().last());
        assert_eq!(thin.times()[1], full.times()[7]);
    }

    #[test]
    fn precondition_errors() {
        let e = simulate_path(&f("ex1-sqrt"), &iv(-1.0, 1.0), &cfg(0.1), 0, &Point::scalar(2.0));
        assert!(matches!(e, Err(SdeError::NotInDomain(_))));
        let e = simulate_path(&f("prod2d"), &iv(-1.0, 1.0), &cfg(0.1), 0, &Point::scalar(0.0));
        assert!(matches!(e, Err(SdeError::DimensionMismatch { .. })));
        assert!(simulate_ensemble(&f("ex1-sqrt"), &iv(-1.0, 1.0), &cfg(0.1), 0, &Point::scalar(0.0)).is_err());
    }

    #[test]
    fn censored_paths_are_reported() {
        let c = SdeConfig {
            epsilon: 0.0,
            step: 1e-2,
            horizon: 1.0,
            ..SdeConfig::default()
        };
        let e = simulate_ensemble(&f("linear"), &iv(-1.0, 1.0), &c, 3, &Point::scalar(0.5)).unwrap();
        assert_eq!(e.summary.censored_count, 3);
        assert!(e.summary.mean_exit.is_nan());
        let p = simulate_path(&f("linear"), &iv(-1.0, 1.0), &c, 0, &Point::scalar(0.5)).unwrap();
        assert!(p.exit.is_none());
    }

    #[test]
    fn overflow_is_reported_with_index() {
        let wild = registry_get("linear", &[("rate", 1e300)]).unwrap();
        let dom = iv(-1e308, 1e308);
        let c = SdeConfig {
            epsilon: 0.0,
            step: 1.0,
            horizon: 50.0,
            ..SdeConfig::default()
        };
        let e = simulate_ensemble(&wild, &dom, &c, 2, &Point::scalar(0.5));
        assert!(matches!(e, Err(SdeError::NonFinite { path_index: 0, .. })));
    }

    #[test]
    fn single_path_statistics() {
        let e = simulate_ensemble(&f("ex1-sqrt"), &iv(-1.0, 1.0), &cfg(0.05), 1, &Point::scalar(0.0)).unwrap();
        let t = e.outcomes[0].exit.as_ref().unwrap().time;
        assert_eq!(e.summary.mean_exit, t);
        assert!(e.summary.sd.is_none() && e.summary.ci95.is_none());
    }

    #[test]
    fn ensemble_order_independent() {
        let c = cfg(0.05);
        let outs: Vec<PathOutcome> = (0..20u64)
            .map(|i| PathOutcome {
                index: i,
                exit: simulate_exit(&f("ex1-sqrt"), &iv(-1.0, 1.0), &c, i, &Point::scalar(0.0)).unwrap(),
            })
            .collect();
        let mut rev = outs.clone();
        rev.reverse();
        assert_eq!(Ensemble::from_outcomes(outs, &c), Ensemble::from_outcomes(rev, &c));
    }

    #[test]
    fn common_noise_increments_are_identical() {
        let c = SdeConfig {
            epsilon: 0.3,
            noise_mode: NoiseMode::Common,
            ..cfg(0.3)
        };
        let fl = f("prod2d");
        let p = simulate_path(&fl, &Domain::ball(Point::zeros(2), 0.25).unwrap(), &c, 9, &Point::new(&[0.01, -0.02])).unwrap();
        let s = p.states();
        assert!(s.len() > 10);
        for k in 0..s.len() - 1 {
            let drift = fl.eval(&s[k]) * c.step;
            let noise = s[k + 1] - s[k] - drift;
            assert!((noise[0] - noise[1]).abs() < 1e-12, "step {k}");
        }
        let ci = SdeConfig {
            noise_mode: NoiseMode::Independent,
            ..c.clone()
        };
        let p = simulate_path(&fl, &Domain::ball(Point::zeros(2), 0.25).unwrap(), &ci, 9, &Point::new(&[0.01, -0.02])).unwrap();
        let s = p.states();
        let noise = s[1] - s[0] - fl.eval(&s[0]) * c.step;
        assert!((noise[0] - noise[1]).abs() > 1e-9);
    }

    #[test]
    fn consecutive_streams_are_uncorrelated() {
        let c = SdeConfig {
            epsilon: 0.1,
            step: 1e-3,
            horizon: 10.0,
            ..SdeConfig::default()
        };
        let e = simulate_ensemble(&f("ex1-sqrt"), &iv(-1.0, 1.0), &c, 10_000, &Point::scalar(0.0)).unwrap();
        let t: Vec<f64> = e.outcomes.iter().map(|o| o.exit.as_ref().unwrap().time).collect();
        let n = t.len() - 1;
        let (a, b) = (&t[..n], &t[1..]);
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for i in 0..n {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
        }
        let rho = sab / libm::sqrt(saa * sbb);
        assert!(rho.abs() < 0.03, "rho {rho}");
    }

    #[test]
    fn brownian_exit_time_scales_inverse_square() {
        // E[τ] = (1 - x²)/ε² at x = 0 on [-1, 1].
        let means: Vec<f64> = [0.5, 0.25]
            .iter()
            .map(|&eps| {
                let c = SdeConfig {
                    epsilon: eps,
                    step: 1e-3,
                    horizon: 400.0,
                    ..SdeConfig::default()
                };
                let e = simulate_ensemble(&f("zero"), &iv(-1.0, 1.0), &c, 2000, &Point::scalar(0.0)).unwrap();
                assert_eq!(e.summary.censored_count, 0);
                let expected = 1.0 / (eps * eps);
                assert!((e.summary.mean_exit - expected).abs() < 0.1 * expected, "eps {eps}: {}", e.summary.mean_exit);
                e.summary.mean_exit
            })
            .collect();
        let ratio = means[1] / means[0];
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn step_warning() {
        assert!(cfg(0.01).warnings().is_empty());
        assert_eq!(SdeConfig { step: 1e-3, ..cfg(0.01) }.warnings().len(), 1);
    }
}
