//! Selection-law estimation, ε sweeps and the statistical checks built on
//! them.
//!
//! Every statistic here is a fold over path outcomes in index order, so
//! results depend only on the configuration and never on scheduling.

mod stats;

pub use stats::{binomial_ci95, chi_square_critical, chi_square_uniform, ChiSquareReport, Z_95, Z_99};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::domain::Domain;
use crate::drift::{ClassifyRule, DriftField};
use crate::hjb::{solve_hjb1, HjbError, Hjb1Options};
use crate::ode::{exit_time_function, ExitRecord, LeavingSolutionSet, OdeError};
use crate::point::Point;
use crate::sde::{Ensemble, EnsembleRunner, EnsembleSummary, SdeConfig, SdeError};

/// Default nearest-member tolerance as a fraction of `diameter(K)`.
pub const MATCH_TOL_FRACTION: f64 = 0.05;

/// Unclassified fraction above which a law carries a warning.
pub const UNCLASSIFIED_WARNING: f64 = 0.05;

/// Chi-square significance level used by the uniformity test.
pub const CHI_SQUARE_LEVEL: f64 = 0.01;

/// Smallest expected count per bin accepted by the chi-square test.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

pub fn default_match_tol(domain: &Domain) -> f64 {
    MATCH_TOL_FRACTION * domain.diameter()
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentError {
    /// A leaving member has no exit record; run `with_exits` first.
    MissingExits(String),
    EmptyLeaving,
    InvalidInput(String),
    TooFewPerBin { expected: f64, n_bins: usize },
    Sde(SdeError),
    Ode(OdeError),
    Hjb(HjbError),
}

impl core::error::Error for ExperimentError {}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::MissingExits(l) => {
                write!(f, "leaving member `{l}` has no exit record; compute exits first")
            }
            ExperimentError::EmptyLeaving => write!(f, "leaving solution set is empty"),
            ExperimentError::InvalidInput(m) => write!(f, "{m}"),
            ExperimentError::TooFewPerBin { expected, n_bins } => write!(
                f,
                "only {expected:.2} expected records per bin over {n_bins} bins (need {MIN_EXPECTED_PER_BIN}); use more paths or fewer bins"
            ),
            ExperimentError::Sde(e) => write!(f, "{e}"),
            ExperimentError::Ode(e) => write!(f, "{e}"),
            ExperimentError::Hjb(e) => write!(f, "{e}"),
        }
    }
}

impl From<SdeError> for ExperimentError {
    fn from(e: SdeError) -> Self {
        ExperimentError::Sde(e)
    }
}

impl From<OdeError> for ExperimentError {
    fn from(e: OdeError) -> Self {
        ExperimentError::Ode(e)
    }
}

impl From<HjbError> for ExperimentError {
    fn from(e: HjbError) -> Self {
        ExperimentError::Hjb(e)
    }
}

/// Angle of a 2D point in `[0, 2π)`.
pub fn angle_of(p: &Point) -> f64 {
    let a = libm::atan2(p[1], p[0]);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

fn angle_bin(p: &Point, n_bins: usize) -> usize {
    ((angle_of(p) / (2.0 * PI) * n_bins as f64) as usize).min(n_bins - 1)
}

pub fn angle_bin_label(k: usize) -> String {
    format!("bin-{k:02}")
}

/// Labels a law over `leaving` is tabulated against, in output order.
pub fn law_labels(leaving: &LeavingSolutionSet) -> Vec<String> {
    match leaving.rule {
        ClassifyRule::AngleBins(n) => (0..n).map(angle_bin_label).collect(),
        _ => leaving.members.iter().map(|m| m.label.clone()).collect(),
    }
}

fn check_exits(leaving: &LeavingSolutionSet) -> Result<(), ExperimentError> {
    if leaving.members.is_empty() {
        return Err(ExperimentError::EmptyLeaving);
    }
    match leaving.members.iter().find(|m| m.path.exit.is_none()) {
        Some(m) => Err(ExperimentError::MissingExits(m.label.clone())),
        None => Ok(()),
    }
}

/// Label of the leaving solution an exit belongs to, or `None`.
///
/// * `Nearest`: the member whose exit point is closest, if within
///   `match_tol` and not tied with another member;
/// * `Orthant`: the member whose seeding direction has the same sign
///   pattern as the exit point;
/// * `AngleBins(n)`: the arc of `[0, 2π)` containing the exit angle.
pub fn classify_exit(
    record: &ExitRecord,
    leaving: &LeavingSolutionSet,
    domain: &Domain,
    match_tol: f64,
) -> Result<Option<String>, ExperimentError> {
    check_exits(leaving)?;
    Ok(classify_checked(record, leaving, domain, match_tol))
}

fn classify_checked(record: &ExitRecord, leaving: &LeavingSolutionSet, domain: &Domain, match_tol: f64) -> Option<String> {
    let p = &record.point;
    match leaving.rule {
        ClassifyRule::AngleBins(n) => Some(angle_bin_label(angle_bin(p, n))),
        ClassifyRule::Orthant => {
            if p.as_slice().contains(&0.0) {
                return None;
            }
            leaving
                .members
                .iter()
                .find(|m| (0..p.dim()).all(|i| m.direction[i] * p[i] > 0.0))
                .map(|m| m.label.clone())
        }
        ClassifyRule::Nearest => {
            let tie = 1e-12 * domain.diameter();
            let mut best: Option<(f64, &str)> = None;
            let mut second = f64::INFINITY;
            for m in &leaving.members {
                let d = m.path.exit.as_ref().map_or(f64::INFINITY, |e| e.point.dist(p));
                match best {
                    Some((b, _)) if d >= b => second = second.min(d),
                    _ => {
                        if let Some((b, _)) = best {
                            second = second.min(b);
                        }
                        best = Some((d, &m.label));
                    }
                }
            }
            let (d, label) = best?;
            (d <= match_tol && second - d > tie).then(|| label.to_string())
        }
    }
}

/// Empirical distribution of the leaving solution selected by the noisy
/// paths.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionLaw {
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    /// Censored paths plus exits matching no label.
    pub unclassified: u64,
    pub n_total: u64,
    pub epsilon: f64,
}

impl SelectionLaw {
    /// Classifies every outcome of `ensemble` in index order.
    pub fn tabulate(
        ensemble: &Ensemble,
        leaving: &LeavingSolutionSet,
        domain: &Domain,
        match_tol: f64,
    ) -> Result<Self, ExperimentError> {
        check_exits(leaving)?;
        let labels = law_labels(leaving);
        let mut counts = alloc::vec![0u64; labels.len()];
        let mut unclassified = 0;
        for o in &ensemble.outcomes {
            let hit = o
                .exit
                .as_ref()
                .and_then(|e| classify_checked(e, leaving, domain, match_tol))
                .and_then(|l| labels.iter().position(|x| *x == l));
            match hit {
                Some(k) => counts[k] += 1,
                None => unclassified += 1,
            }
        }
        Ok(SelectionLaw {
            labels,
            counts,
            unclassified,
            n_total: ensemble.outcomes.len() as u64,
            epsilon: ensemble.summary.epsilon,
        })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n_total as f64).collect()
    }

    /// 95% binomial half-widths per label.
    pub fn ci95(&self) -> Vec<f64> {
        self.frequencies().iter().map(|&p| binomial_ci95(p, self.n_total)).collect()
    }

    pub fn frequency(&self, label: &str) -> Option<f64> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.counts[k] as f64 / self.n_total as f64)
    }

    pub fn unclassified_fraction(&self) -> f64 {
        self.unclassified as f64 / self.n_total as f64
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.unclassified_fraction() > UNCLASSIFIED_WARNING {
            w.push(format!(
                "{:.1}% of paths unclassified at eps = {}: widen match_tol, raise the horizon or lower eps",
                100.0 * self.unclassified_fraction(),
                self.epsilon
            ));
        }
        w
    }

    /// Largest `|f_label - p_label|` over the labels of `target`.
    pub fn max_deviation(&self, target: &[(String, f64)]) -> f64 {
        target
            .iter()
            .map(|(l, p)| (self.frequency(l).unwrap_or(0.0) - p).abs())
            .fold(0.0, f64::max)
    }
}

/// Simulates `n_paths` from the origin and tabulates the selected leaving
/// solutions.
pub fn estimate_selection_law(
    runner: &dyn EnsembleRunner,
    field: &DriftField,
    domain: &Domain,
    cfg: &SdeConfig,
    n_paths: usize,
    leaving: &LeavingSolutionSet,
    match_tol: f64,
) -> Result<(SelectionLaw, Ensemble), ExperimentError> {
    check_exits(leaving)?;
    let ensemble = runner.run(field, domain, cfg, n_paths, &Point::zeros(domain.dim()))?;
    let law = SelectionLaw::tabulate(&ensemble, leaving, domain, match_tol)?;
    Ok((law, ensemble))
}

/// Chi-square test of exit angles against the uniform law on `[0, 2π)`.
pub fn angle_uniformity_test(records: &[ExitRecord], n_bins: usize) -> Result<ChiSquareReport, ExperimentError> {
    if n_bins < 2 {
        return Err(ExperimentError::InvalidInput(format!("need at least 2 bins, got {n_bins}")));
    }
    if let Some(r) = records.iter().find(|r| r.point.dim() != 2) {
        return Err(ExperimentError::InvalidInput(format!("angle test needs 2D exits, got {}", r.point)));
    }
    let expected = records.len() as f64 / n_bins as f64;
    if expected < MIN_EXPECTED_PER_BIN {
        return Err(ExperimentError::TooFewPerBin { expected, n_bins });
    }
    let mut counts = alloc::vec![0u64; n_bins];
    for r in records {
        counts[angle_bin(&r.point, n_bins)] += 1;
    }
    Ok(chi_square_uniform(&counts, Z_99))
}

/// Sweep verdicts.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepVerdicts {
    /// Largest label-frequency change between the two smallest ε.
    pub last_change: f64,
    /// `last_change` is within twice the 95% half-width.
    pub stabilized: bool,
    /// `|mean exit - V_K(0)|` per ε.
    pub exit_gaps: Vec<f64>,
    /// Exit gaps never grow by more than twice their 95% half-width.
    pub exit_gap_shrinking: Option<bool>,
    /// Largest deviation from the stated law per ε.
    pub law_gaps: Vec<f64>,
    /// Law gaps never grow by more than twice the binomial half-width.
    pub law_gap_non_increasing: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub field: String,
    pub domain: Domain,
    pub epsilons: Vec<f64>,
    pub laws: Vec<SelectionLaw>,
    pub mean_exit: Vec<EnsembleSummary>,
    pub v_k_reference: Option<f64>,
    /// Selection probabilities stated for the field, if any.
    pub target: Vec<(String, f64)>,
    pub verdicts: SweepVerdicts,
}

fn non_increasing_within(gaps: &[f64], slack: &[f64]) -> bool {
    gaps.windows(2).zip(slack.iter().skip(1)).all(|(w, s)| w[1] <= w[0] + s)
}

/// Selection law and mean exit time at each `ε` of a strictly decreasing
/// list, with the same path count, seed and step throughout.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_sweep(
    runner: &dyn EnsembleRunner,
    field: &DriftField,
    domain: &Domain,
    base_cfg: &SdeConfig,
    epsilons: &[f64],
    n_paths: usize,
    leaving: &LeavingSolutionSet,
    match_tol: f64,
    v_k_reference: Option<f64>,
) -> Result<SweepResult, ExperimentError> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ExperimentError::InvalidInput(format!(
            "epsilons must be nonempty and strictly decreasing, got {epsilons:?}"
        )));
    }
    let mut laws = Vec::new();
    let mut mean_exit = Vec::new();
    for &eps in epsilons {
        let cfg = base_cfg.with_epsilon(eps);
        let (law, ens) = estimate_selection_law(runner, field, domain, &cfg, n_paths, leaving, match_tol)?;
        laws.push(law);
        mean_exit.push(ens.summary);
    }
    let target: Vec<(String, f64)> = field.stated_law().to_vec();

    let last_change = if laws.len() >= 2 {
        let (a, b) = (&laws[laws.len() - 2], &laws[laws.len() - 1]);
        a.frequencies()
            .iter()
            .zip(b.frequencies())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    let ci_last = laws
        .iter()
        .rev()
        .take(2)
        .flat_map(|l| l.ci95())
        .fold(0.0, f64::max);
    let stabilized = laws.len() >= 2 && last_change <= 2.0 * ci_last;

    let exit_gaps: Vec<f64> = match v_k_reference {
        Some(v) => mean_exit.iter().map(|s| (s.mean_exit - v).abs()).collect(),
        None => Vec::new(),
    };
    let exit_slack: Vec<f64> = mean_exit.iter().map(|s| 2.0 * s.ci95.unwrap_or(0.0)).collect();
    let exit_gap_shrinking = v_k_reference.map(|_| non_increasing_within(&exit_gaps, &exit_slack));

    let law_gaps: Vec<f64> = if target.is_empty() {
        Vec::new()
    } else {
        laws.iter().map(|l| l.max_deviation(&target)).collect()
    };
    let law_slack: Vec<f64> = laws.iter().map(|l| 2.0 * l.ci95().into_iter().fold(0.0, f64::max)).collect();
    let law_gap_non_increasing = (!target.is_empty()).then(|| non_increasing_within(&law_gaps, &law_slack));

    Ok(SweepResult {
        field: field.identifier(),
        domain: domain.clone(),
        epsilons: epsilons.to_vec(),
        laws,
        mean_exit,
        v_k_reference,
        target,
        verdicts: SweepVerdicts {
            last_change,
            stabilized,
            exit_gaps,
            exit_gap_shrinking,
            law_gaps,
            law_gap_non_increasing,
        },
    })
}

/// The three estimates of the exit time from the origin that the limit
/// identity equates.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    /// Monte Carlo mean exit time at the configured ε.
    pub monte_carlo: EnsembleSummary,
    /// Minimum over leaving solutions of the exit time.
    pub exit_time_function: f64,
    /// First-order grid solution at the origin node.
    pub hjb1: f64,
    pub max_pairwise_gap: f64,
}

impl IdentityReport {
    pub fn new(monte_carlo: EnsembleSummary, exit_time_function: f64, hjb1: f64) -> Self {
        let mut r = IdentityReport {
            monte_carlo,
            exit_time_function,
            hjb1,
            max_pairwise_gap: 0.0,
        };
        r.max_pairwise_gap = r.gaps().iter().map(|g| g.2).fold(0.0, f64::max);
        r
    }

    /// `(name_a, name_b, |a - b|)` for every pair.
    pub fn gaps(&self) -> [(&'static str, &'static str, f64); 3] {
        let mc = self.monte_carlo.mean_exit;
        [
            ("monte_carlo", "exit_time_function", (mc - self.exit_time_function).abs()),
            ("monte_carlo", "hjb1", (mc - self.hjb1).abs()),
            ("exit_time_function", "hjb1", (self.exit_time_function - self.hjb1).abs()),
        ]
    }
}

/// Options for [`check_exit_identity`].
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityOptions {
    pub n_paths: usize,
    pub hjb1: Hjb1Options,
    /// Horizon and step for the deterministic exit time.
    pub ode_horizon: f64,
    pub ode_step: f64,
}

/// Compares the Monte Carlo mean exit time with `V_K(0)` from the leaving
/// set and from the first-order grid solver.
pub fn check_exit_identity(
    runner: &dyn EnsembleRunner,
    field: &DriftField,
    domain: &Domain,
    cfg: &SdeConfig,
    leaving: &LeavingSolutionSet,
    opts: &IdentityOptions,
) -> Result<IdentityReport, ExperimentError> {
    let origin = Point::zeros(domain.dim());
    let ens = runner.run(field, domain, cfg, opts.n_paths, &origin)?;
    let vk = exit_time_function(field, domain, leaving, &origin, opts.ode_horizon, opts.ode_step)?;
    let grid = solve_hjb1(field, domain, &opts.hjb1)?;
    let hjb1 = grid
        .value_near(&origin)
        .ok_or_else(|| ExperimentError::InvalidInput(String::from("origin node is not interior")))?;
    Ok(IdentityReport::new(ens.summary, vk, hjb1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::registry_get;
    use crate::sde::{NoiseMode, PathOutcome, Sequential};
    use proptest::prelude::*;

    fn leaving(label: &str, domain: &Domain) -> (DriftField, LeavingSolutionSet) {
        let f = registry_get(label, &[]).unwrap();
        let ls = LeavingSolutionSet::from_analytic(&f, 4.0, 1e-3, 64).unwrap().with_exits(domain);
        (f, ls)
    }

    fn rec(p: &[f64]) -> ExitRecord {
        ExitRecord {
            time: 1.0,
            point: Point::new(p),
            label: None,
        }
    }

    #[test]
    fn nearest_member_classification() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let (_, ls) = leaving("ex1-sqrt", &d);
        let tol = default_match_tol(&d);
        assert_eq!(classify_exit(&rec(&[0.997]), &ls, &d, tol).unwrap().as_deref(), Some("+branch"));
        assert_eq!(classify_exit(&rec(&[-1.0]), &ls, &d, tol).unwrap().as_deref(), Some("-branch"));
        // Equidistant and far from both exits.
        assert_eq!(classify_exit(&rec(&[0.0]), &ls, &d, tol).unwrap(), None);
    }

    #[test]
    fn orthant_and_angle_classification() {
        let d = Domain::ball(Point::zeros(2), 0.25).unwrap();
        let (_, ls) = leaving("prod2d", &d);
        let tol = default_match_tol(&d);
        assert_eq!(classify_exit(&rec(&[0.2, 0.15]), &ls, &d, tol).unwrap().as_deref(), Some("X1"));
        assert_eq!(classify_exit(&rec(&[0.2, -0.15]), &ls, &d, tol).unwrap().as_deref(), Some("X2"));
        assert_eq!(classify_exit(&rec(&[-0.2, 0.15]), &ls, &d, tol).unwrap().as_deref(), Some("X3"));
        assert_eq!(classify_exit(&rec(&[-0.2, -0.15]), &ls, &d, tol).unwrap().as_deref(), Some("X4"));
        let d1 = Domain::ball(Point::zeros(2), 1.0).unwrap();
        let (_, rs) = leaving("radial2d", &d1);
        assert_eq!(classify_exit(&rec(&[0.0, 1.0]), &rs, &d1, 0.1).unwrap().as_deref(), Some("bin-03"));
        assert_eq!(classify_exit(&rec(&[1.0, -1e-9]), &rs, &d1, 0.1).unwrap().as_deref(), Some("bin-11"));
    }

    #[test]
    fn classification_needs_exit_records() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = registry_get("ex1-sqrt", &[]).unwrap();
        let ls = LeavingSolutionSet::from_analytic(&f, 4.0, 1e-3, 8).unwrap();
        assert!(matches!(classify_exit(&rec(&[1.0]), &ls, &d, 0.1), Err(ExperimentError::MissingExits(_))));
    }

    #[test]
    fn classification_ignores_member_order() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let (_, ls) = leaving("ex1-sqrt", &d);
        let mut rev = ls.clone();
        rev.members.reverse();
        for x in [-0.99, -0.5, 0.3, 0.999] {
            assert_eq!(
                classify_exit(&rec(&[x]), &ls, &d, 0.6).unwrap(),
                classify_exit(&rec(&[x]), &rev, &d, 0.6).unwrap()
            );
        }
    }

    #[test]
    fn symmetric_law_from_ensemble() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let (f, ls) = leaving("ex1-sqrt", &d);
        let cfg = SdeConfig {
            epsilon: 0.05,
            step: 1e-3,
            horizon: 5.0,
            ..SdeConfig::default()
        };
        let (law, _) = estimate_selection_law(&Sequential, &f, &d, &cfg, 2000, &ls, default_match_tol(&d)).unwrap();
        assert_eq!(law.counts.iter().sum::<u64>() + law.unclassified, law.n_total);
        let fr = law.frequencies();
        assert!((fr[0] - fr[1]).abs() <= 3.0 * 2.0 * law.ci95()[0], "{fr:?}");
        assert!(law.warnings().is_empty());
    }

    #[test]
    fn doubling_paths_keeps_prefix() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let (f, ls) = leaving("ex1-sqrt", &d);
        let cfg = SdeConfig {
            epsilon: 0.1,
            step: 1e-3,
            horizon: 5.0,
            master_seed: 7,
            ..SdeConfig::default()
        };
        let tol = default_match_tol(&d);
        let small = Sequential.run(&f, &d, &cfg, 200, &Point::scalar(0.0)).unwrap();
        let big = Sequential.run(&f, &d, &cfg, 400, &Point::scalar(0.0)).unwrap();
        for (a, b) in small.outcomes.iter().zip(&big.outcomes) {
            let ca = a.exit.as_ref().map(|e| classify_exit(e, &ls, &d, tol).unwrap());
            let cb = b.exit.as_ref().map(|e| classify_exit(e, &ls, &d, tol).unwrap());
            assert_eq!(ca, cb);
        }
    }

    #[test]
    fn uniformity_test_cases() {
        let uniform: Vec<ExitRecord> = (0..1200)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.5) / 1200.0;
                rec(&[libm::cos(a), libm::sin(a)])
            })
            .collect();
        let r = angle_uniformity_test(&uniform, 12).unwrap();
        assert!(r.passed && r.statistic < 1e-9);
        let spike: Vec<ExitRecord> = (0..1200).map(|_| rec(&[1.0, 0.0])).collect();
        let r = angle_uniformity_test(&spike, 12).unwrap();
        assert!(!r.passed && r.statistic > 1e4);
        // Mass on the two diagonal quadrants only.
        let diag: Vec<ExitRecord> = (0..400).map(|k| if k % 2 == 0 { rec(&[1.0, 1.0]) } else { rec(&[-1.0, -1.0]) }).collect();
        assert!(!angle_uniformity_test(&diag, 4).unwrap().passed);
        assert!(matches!(
            angle_uniformity_test(&uniform[..40], 12),
            Err(ExperimentError::TooFewPerBin { .. })
        ));
    }

    #[test]
    fn common_noise_stays_on_diagonal() {
        let d = Domain::ball(Point::zeros(2), 0.25).unwrap();
        let (f, ls) = leaving("prod2d", &d);
        let cfg = SdeConfig {
            epsilon: 0.02,
            step: 1e-4,
            horizon: 3.0,
            noise_mode: NoiseMode::Common,
            ..SdeConfig::default()
        };
        let (law, _) = estimate_selection_law(&Sequential, &f, &d, &cfg, 400, &ls, default_match_tol(&d)).unwrap();
        let off = law.frequency("X2").unwrap() + law.frequency("X3").unwrap();
        assert!(off <= 0.02, "{law:?}");
    }

    #[test]
    fn sweep_rejects_unsorted_epsilons_and_reports_gaps() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let (f, ls) = leaving("ex1-sqrt", &d);
        let cfg = SdeConfig {
            step: 1e-3,
            horizon: 5.0,
            ..SdeConfig::default()
        };
        let tol = default_match_tol(&d);
        assert!(epsilon_sweep(&Sequential, &f, &d, &cfg, &[0.1, 0.2], 10, &ls, tol, None).is_err());
        let s = epsilon_sweep(&Sequential, &f, &d, &cfg, &[0.2, 0.1], 500, &ls, tol, Some(1.0)).unwrap();
        assert_eq!(s.laws.len(), 2);
        assert!(s.laws.iter().all(|l| l.n_total == 500));
        assert_eq!(s.verdicts.exit_gaps.len(), 2);
        assert_eq!(s.verdicts.law_gaps.len(), 2);
        assert!(s.verdicts.exit_gap_shrinking.is_some());
    }

    #[test]
    fn tabulate_counts_censored_as_unclassified() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let (_, ls) = leaving("ex1-sqrt", &d);
        let cfg = SdeConfig::default();
        let outcomes = alloc::vec![
            PathOutcome { index: 0, exit: Some(rec(&[1.0])) },
            PathOutcome { index: 1, exit: None },
            PathOutcome { index: 2, exit: Some(rec(&[-1.0])) },
        ];
        let ens = Ensemble::from_outcomes(outcomes, &cfg);
        let law = SelectionLaw::tabulate(&ens, &ls, &d, 0.1).unwrap();
        assert_eq!(law.unclassified, 1);
        assert_eq!(law.counts.iter().sum::<u64>(), 2);
        assert!(!law.warnings().is_empty());
    }

    proptest! {
        #[test]
        fn frequencies_sum_to_classified_share(xs in proptest::collection::vec(-1.0f64..1.0, 1..60)) {
            let d = Domain::interval(-1.0, 1.0).unwrap();
            let (_, ls) = leaving("ex1-sqrt", &d);
            let outcomes = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| PathOutcome { index: i as u64, exit: Some(rec(&[x])) })
                .collect();
            let ens = Ensemble::from_outcomes(outcomes, &SdeConfig::default());
            let law = SelectionLaw::tabulate(&ens, &ls, &d, 0.5).unwrap();
            let total: f64 = law.frequencies().iter().sum();
            prop_assert_eq!(law.counts.iter().sum::<u64>() + law.unclassified, law.n_total);
            prop_assert!(total <= 1.0 + 1e-12);
            if law.unclassified == 0 {
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
