//! Drift fields `b: R^d → R^d` and the registry of named examples.
//!
//! Registered labels:
//!
//! | label      | dim | drift                                                     |
//! |------------|-----|-----------------------------------------------------------|
//! | `ex1-sqrt` | 1   | `2·sign(x)·√|x|`                                          |
//! | `ex2-asym` | 1   | `√x` for `x ≥ 0`, `-3√|x|` for `x < 0`                    |
//! | `powerlaw` | 1   | `c₊·x^γ` for `x ≥ 0`, `-c₋·|x|^γ` for `x < 0`             |
//! | `prod2d`   | 2   | `2·sign(xᵢ)·√|xᵢ|` per coordinate                         |
//! | `radial2d` | 2   | `2x/|x|^{1/2}`                                            |
//! | `zero`     | any | `0` (control field, violates the nondegeneracy check)     |
//! | `linear`   | any | `a·x` (Lipschitz control field, no leaving branches)      |

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::Domain;
use crate::point::Point;
use crate::quasi;

/// Every label understood by [`registry_get`].
pub const REGISTRY_LABELS: &[&str] = &[
    "ex1-sqrt", "ex2-asym", "powerlaw", "prod2d", "radial2d", "zero", "linear",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DriftKind {
    /// One-dimensional asymmetric power law.
    PowerLaw { gamma: f64, c_plus: f64, c_minus: f64 },
    /// Coordinatewise `2·sign·√|·|` in the plane.
    Prod2d,
    /// `2x/|x|^{1/2}` in the plane.
    Radial2d,
    Zero { dim: usize },
    Linear { dim: usize, rate: f64 },
}

/// A closed-form leaving branch `xᵢ(t) = signᵢ·(rate·t)^power`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticBranch {
    pub label: String,
    pub signs: Point,
    pub rate: f64,
    pub power: f64,
    pub description: String,
}

impl AnalyticBranch {
    pub fn state(&self, t: f64) -> Point {
        let m = libm::pow(self.rate * t.max(0.0), self.power);
        self.signs * m
    }

    /// First time `|x(t)|` reaches `radius` (the branch moves along a ray).
    pub fn time_to_radius(&self, radius: f64) -> f64 {
        let s = self.signs.norm();
        libm::pow(radius / s, 1.0 / self.power) / self.rate
    }
}

/// The closed-form leaving solutions attached to a registered field.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticLeaving {
    None,
    /// Finitely many branches.
    Branches(Vec<AnalyticBranch>),
    /// Every ray `(rate·t)^power · u`, `|u| = 1`.
    Rays { rate: f64, power: f64 },
}

/// How exit points are mapped to leaving-branch labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifyRule {
    /// Nearest member exit point within a matching tolerance.
    Nearest,
    /// Sign pattern of the exit point; used when the leaving set contains
    /// one orthant-diagonal branch per orthant next to a continuum of
    /// axis-aligned and delayed branches.
    Orthant,
    /// Exit angle binned over `[0, 2π)` (continuum of radial branches).
    AngleBins(usize),
}

/// An immutable drift field with identifying metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftField {
    label: String,
    kind: DriftKind,
    params: Vec<(String, f64)>,
    bound: f64,
    analytic: AnalyticLeaving,
    stated_law: Vec<(String, f64)>,
    rule: ClassifyRule,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegistryError {
    UnknownLabel(String),
    UnknownParam { label: String, param: String },
    InvalidParam { param: String, value: f64, reason: &'static str },
}

impl core::error::Error for RegistryError {}

impl fmt::Display for RegistryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryError::UnknownLabel(l) => write!(
                f,
                "unknown drift label `{l}`; valid labels: {}",
                REGISTRY_LABELS.join(", ")
            ),
            RegistryError::UnknownParam { label, param } => {
                write!(f, "drift `{label}` has no parameter `{param}`")
            }
            RegistryError::InvalidParam { param, value, reason } => {
                write!(f, "parameter `{param}` = {value} is invalid: {reason}")
            }
        }
    }
}

fn lookup(params: &[(&str, f64)], name: &str) -> Option<f64> {
    params.iter().rev().find(|(k, _)| *k == name).map(|&(_, v)| v)
}

fn check_params(label: &str, params: &[(&str, f64)], allowed: &[&str]) -> Result<(), RegistryError> {
    for (k, v) in params {
        if !allowed.contains(k) {
            return Err(RegistryError::UnknownParam {
                label: label.to_owned(),
                param: (*k).to_owned(),
            });
        }
        if !v.is_finite() {
            return Err(RegistryError::InvalidParam {
                param: (*k).to_owned(),
                value: *v,
                reason: "must be finite",
            });
        }
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64, RegistryError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(RegistryError::InvalidParam {
            param: name.to_owned(),
            value: v,
            reason: "must be positive",
        })
    }
}

fn dim_param(params: &[(&str, f64)], default: usize) -> Result<usize, RegistryError> {
    let d = lookup(params, "dim").unwrap_or(default as f64);
    if d == libm::trunc(d) && (1.0..=crate::MAX_DIM as f64).contains(&d) {
        Ok(d as usize)
    } else {
        Err(RegistryError::InvalidParam {
            param: "dim".to_owned(),
            value: d,
            reason: "must be an integer between 1 and 3",
        })
    }
}

fn fmt_coef(c: f64) -> String {
    if c == 1.0 {
        String::new()
    } else {
        format!("{c}·")
    }
}

fn power_law_branches(gamma: f64, c_plus: f64, c_minus: f64) -> Vec<AnalyticBranch> {
    // x' = c x^γ from 0 gives x(t) = ((1-γ) c t)^{1/(1-γ)}.
    let power = 1.0 / (1.0 - gamma);
    [("+branch", 1.0, c_plus), ("-branch", -1.0, c_minus)]
        .into_iter()
        .map(|(label, sign, c)| AnalyticBranch {
            label: label.to_owned(),
            signs: Point::scalar(sign),
            rate: (1.0 - gamma) * c,
            power,
            description: format!(
                "x(t) = {}({}t)^{}",
                if sign < 0.0 { "-" } else { "" },
                fmt_coef((1.0 - gamma) * c),
                power
            ),
        })
        .collect()
}

/// Scale-function selection probabilities of a 1D power law,
/// `P(+) ∝ c₊^{1/(1+γ)}`: the side with the stronger drift is chosen more
/// often.
pub fn power_law_selection(gamma: f64, c_plus: f64, c_minus: f64) -> (f64, f64) {
    let e = 1.0 / (1.0 + gamma);
    let wp = libm::pow(c_plus, e);
    let wm = libm::pow(c_minus, e);
    (wp / (wp + wm), wm / (wp + wm))
}

/// Looks up a named drift field. `params` override the label's defaults.
///
/// The returned field has `bound = +∞`; use [`DriftField::bounded_on`] to
/// record the sup-norm bound over an experiment domain.
pub fn registry_get(label: &str, params: &[(&str, f64)]) -> Result<DriftField, RegistryError> {
    let mut rule = ClassifyRule::Nearest;
    let mut stated_law = Vec::new();
    let (kind, analytic, stored): (DriftKind, AnalyticLeaving, Vec<(&str, f64)>) = match label {
        "ex1-sqrt" | "ex2-asym" | "powerlaw" => {
            let (g0, cp0, cm0) = match label {
                "ex1-sqrt" => (0.5, 2.0, 2.0),
                "ex2-asym" => (0.5, 1.0, 3.0),
                _ => (0.5, 1.0, 1.0),
            };
            check_params(label, params, &["gamma", "c", "c_plus", "c_minus"])?;
            let c = lookup(params, "c");
            let gamma = lookup(params, "gamma").unwrap_or(g0);
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(RegistryError::InvalidParam {
                    param: "gamma".to_owned(),
                    value: gamma,
                    reason: "must lie in (0, 1)",
                });
            }
            let c_plus = positive("c_plus", lookup(params, "c_plus").or(c).unwrap_or(cp0))?;
            let c_minus = positive("c_minus", lookup(params, "c_minus").or(c).unwrap_or(cm0))?;
            if label != "powerlaw" {
                let (pp, pm) = power_law_selection(gamma, c_plus, c_minus);
                stated_law.push(("+branch".to_owned(), pp));
                stated_law.push(("-branch".to_owned(), pm));
            }
            (
                DriftKind::PowerLaw { gamma, c_plus, c_minus },
                AnalyticLeaving::Branches(power_law_branches(gamma, c_plus, c_minus)),
                alloc::vec![("c_minus", c_minus), ("c_plus", c_plus), ("gamma", gamma)],
            )
        }
        "prod2d" => {
            check_params(label, params, &[])?;
            rule = ClassifyRule::Orthant;
            let branches = [("X1", 1.0, 1.0), ("X2", 1.0, -1.0), ("X3", -1.0, 1.0), ("X4", -1.0, -1.0)]
                .into_iter()
                .map(|(l, s1, s2): (&str, f64, f64)| {
                    stated_law.push((l.to_owned(), 0.25));
                    AnalyticBranch {
                        label: l.to_owned(),
                        signs: Point::new(&[s1, s2]),
                        rate: 1.0,
                        power: 2.0,
                        description: format!(
                            "X(t) = ({}t^2, {}t^2)",
                            if s1 < 0.0 { "-" } else { "" },
                            if s2 < 0.0 { "-" } else { "" }
                        ),
                    }
                })
                .collect();
            (DriftKind::Prod2d, AnalyticLeaving::Branches(branches), Vec::new())
        }
        "radial2d" => {
            check_params(label, params, &[])?;
            rule = ClassifyRule::AngleBins(12);
            (
                DriftKind::Radial2d,
                AnalyticLeaving::Rays { rate: 1.0, power: 2.0 },
                Vec::new(),
            )
        }
        "zero" => {
            check_params(label, params, &["dim"])?;
            let dim = dim_param(params, 1)?;
            (DriftKind::Zero { dim }, AnalyticLeaving::None, alloc::vec![("dim", dim as f64)])
        }
        "linear" => {
            check_params(label, params, &["dim", "rate"])?;
            let dim = dim_param(params, 1)?;
            let rate = lookup(params, "rate").unwrap_or(-1.0);
            (
                DriftKind::Linear { dim, rate },
                AnalyticLeaving::None,
                alloc::vec![("dim", dim as f64), ("rate", rate)],
            )
        }
        other => return Err(RegistryError::UnknownLabel(other.to_owned())),
    };
    Ok(DriftField {
        label: label.to_owned(),
        kind,
        params: stored.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        bound: f64::INFINITY,
        analytic,
        stated_law,
        rule,
    })
}

#[inline]
fn signed_pow(x: f64, gamma: f64, c_plus: f64, c_minus: f64) -> f64 {
    if x > 0.0 {
        c_plus * fast_pow(x, gamma)
    } else if x < 0.0 {
        -c_minus * fast_pow(-x, gamma)
    } else {
        0.0
    }
}

#[inline]
fn fast_pow(x: f64, gamma: f64) -> f64 {
    if gamma == 0.5 {
        libm::sqrt(x)
    } else {
        libm::pow(x, gamma)
    }
}

impl DriftField {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> DriftKind {
        self.kind
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DriftKind::PowerLaw { .. } => 1,
            DriftKind::Prod2d | DriftKind::Radial2d => 2,
            DriftKind::Zero { dim } | DriftKind::Linear { dim, .. } => dim,
        }
    }

    /// Sup-norm bound `M_b` (`+∞` when not recorded).
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn analytic(&self) -> &AnalyticLeaving {
        &self.analytic
    }

    /// Selection probabilities stated for this named instance (empty if none).
    pub fn stated_law(&self) -> &[(String, f64)] {
        &self.stated_law
    }

    pub fn classify_rule(&self) -> ClassifyRule {
        self.rule
    }

    /// Records `bound = sup |b|` over the ball of radius `max|x| + 1`
    /// around the origin, which contains `domain` inflated by one.
    pub fn bounded_on(mut self, domain: &Domain) -> Self {
        self.bound = self.sup_norm_within(domain.max_norm() + 1.0);
        self
    }

    /// Exact `sup_{|x| ≤ radius} |b(x)|` for the registered kinds.
    pub fn sup_norm_within(&self, radius: f64) -> f64 {
        match self.kind {
            DriftKind::PowerLaw { gamma, c_plus, c_minus } => c_plus.max(c_minus) * libm::pow(radius, gamma),
            // |b|² = 4(|x₁| + |x₂|) ≤ 4√2 |x|.
            DriftKind::Prod2d => 2.0 * libm::sqrt(core::f64::consts::SQRT_2 * radius),
            DriftKind::Radial2d => 2.0 * libm::sqrt(radius),
            DriftKind::Zero { .. } => 0.0,
            DriftKind::Linear { rate, .. } => rate.abs() * radius,
        }
    }

    #[inline]
    pub fn eval(&self, x: &Point) -> Point {
        debug_assert_eq!(x.dim(), self.dim());
        match self.kind {
            DriftKind::PowerLaw { gamma, c_plus, c_minus } => {
                Point::scalar(signed_pow(x[0], gamma, c_plus, c_minus))
            }
            DriftKind::Prod2d => x.map(|c| signed_pow(c, 0.5, 2.0, 2.0)),
            DriftKind::Radial2d => {
                let r2 = x.norm_sq();
                if r2 == 0.0 {
                    Point::zeros(2)
                } else {
                    let q = libm::sqrt(libm::sqrt(r2));
                    *x * (2.0 / q)
                }
            }
            DriftKind::Zero { dim } => Point::zeros(dim),
            DriftKind::Linear { rate, .. } => *x * rate,
        }
    }

    /// Canonical `label(k=v,...)` identifier.
    pub fn identifier(&self) -> String {
        let mut s = self.label.clone();
        if !self.params.is_empty() {
            s.push('(');
            for (i, (k, v)) in self.params.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{k}={v}"));
            }
            s.push(')');
        }
        s
    }
}

/// Which hypothesis a report refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assumption {
    /// `b(0) = 0` and `b(x) ≠ 0` for `x ≠ 0`.
    H2,
    /// A common hitting time for every leaving branch.
    H3,
    /// Outward transversality `⟨b, n⟩ > 0` on the boundary.
    H4,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::H2 => "H2",
            Assumption::H3 => "H3",
            Assumption::H4 => "H4",
        })
    }
}

/// Outcome of a numerical assumption check.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub passed: bool,
    /// The tested quantity: min `|b|` (H2), exit-time spread (H3) or
    /// min `⟨b, n⟩` (H4).
    pub statistic: f64,
    /// Where the statistic was attained.
    pub witness: Option<Point>,
    pub detail: String,
}

/// Samples `|b|` on `n_samples` Halton points with
/// `sample_radius/100 ≤ |x| ≤ sample_radius`.
pub fn check_h2(field: &DriftField, sample_radius: f64, n_samples: usize) -> AssumptionReport {
    let dim = field.dim();
    let at_origin = field.eval(&Point::zeros(dim)).norm();
    let mut min = f64::INFINITY;
    let mut witness = None;
    for x in quasi::shell_points(dim, sample_radius / 100.0, sample_radius, n_samples) {
        let v = field.eval(&x).norm();
        if v < min {
            min = v;
            witness = Some(x);
        }
    }
    AssumptionReport {
        assumption: Assumption::H2,
        passed: at_origin == 0.0 && min > 0.0,
        statistic: min,
        witness,
        detail: format!("|b(0)| = {at_origin}, min |b(x)| = {min} over {n_samples} samples"),
    }
}
