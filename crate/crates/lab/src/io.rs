//! File formats.
//!
//! CSV floats are written with `{:.16e}` (17 significant digits, enough to
//! round-trip any `f64`); JSON floats use the shortest representation that
//! round-trips. Lines end in `\n`. Nothing time-dependent is ever written
//! into a data file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path as FsPath;

use anyhow::{Context, Result};
use serde::Serialize;
use zeronoise_core::experiments::{ChiSquareReport, IdentityReport, SelectionLaw, SweepResult};
use zeronoise_core::hjb::GridField;
use zeronoise_core::sde::{Ensemble, EnsembleSummary};
use zeronoise_core::{AssumptionReport, Domain, ExitRecord, Path};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn coord_header(prefix: &str, dim: usize) -> String {
    (1..=dim).map(|i| format!(",{prefix}{i}")).collect()
}

pub fn write_text(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &FsPath, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

/// `t,x_1,..,x_d` rows; an exited path ends with `# exit,<time>,<coords>`.
pub fn path_csv(path: &Path) -> String {
    let mut s = format!("t{}\n", coord_header("x_", path.dim()));
    for (t, x) in path.times().iter().zip(path.states()) {
        s.push_str(&fmt_f64(*t));
        for c in x.as_slice() {
            write!(s, ",{}", fmt_f64(*c)).unwrap();
        }
        s.push('\n');
    }
    if let Some(e) = &path.exit {
        s.push_str("# exit,");
        s.push_str(&fmt_f64(e.time));
        for c in e.point.as_slice() {
            write!(s, ",{}", fmt_f64(*c)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// `path_index,exit_time,exit_coord_1..d,censored`; censored paths carry
/// `nan` in the time and coordinate columns.
pub fn ensemble_csv(ens: &Ensemble, dim: usize) -> String {
    let mut s = format!("path_index,exit_time{},censored\n", coord_header("exit_coord_", dim));
    for o in &ens.outcomes {
        write!(s, "{}", o.index).unwrap();
        match &o.exit {
            Some(e) => {
                write!(s, ",{}", fmt_f64(e.time)).unwrap();
                for c in e.point.as_slice() {
                    write!(s, ",{}", fmt_f64(*c)).unwrap();
                }
                s.push_str(",0\n");
            }
            None => {
                for _ in 0..=dim {
                    s.push_str(",nan");
                }
                s.push_str(",1\n");
            }
        }
    }
    s
}

#[derive(Serialize)]
pub struct SummaryJson {
    pub n: usize,
    pub mean_exit: Option<f64>,
    pub sd: Option<f64>,
    pub ci95: Option<f64>,
    pub censored_count: usize,
    pub epsilon: f64,
    pub step: f64,
    pub seed: u64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&EnsembleSummary> for SummaryJson {
    fn from(s: &EnsembleSummary) -> Self {
        SummaryJson {
            n: s.n,
            mean_exit: finite(s.mean_exit),
            sd: s.sd,
            ci95: s.ci95,
            censored_count: s.censored_count,
            epsilon: s.epsilon,
            step: s.step,
            seed: s.seed,
        }
    }
}

/// Interior nodes as `x_1,..,x_d,value`.
pub fn grid_csv(g: &GridField) -> String {
    let mut s = format!("{},value\n", (1..=g.dim()).map(|i| format!("x_{i}")).collect::<Vec<_>>().join(","));
    for (p, v) in g.interior_nodes() {
        for c in p.as_slice() {
            s.push_str(&fmt_f64(*c));
            s.push(',');
        }
        s.push_str(&fmt_f64(v));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
pub struct GridMeta {
    pub h: f64,
    pub epsilon: Option<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub interior_nodes: usize,
    pub warnings: Vec<String>,
}

impl From<&GridField> for GridMeta {
    fn from(g: &GridField) -> Self {
        GridMeta {
            h: g.h,
            epsilon: g.epsilon,
            iterations: g.iterations,
            final_residual: g.final_residual,
            interior_nodes: g.interior_count(),
            warnings: g.warnings.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct DomainJson {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl From<&Domain> for DomainJson {
    fn from(d: &Domain) -> Self {
        let mut j = DomainJson {
            kind: "",
            l: None,
            r: None,
            lo: None,
            hi: None,
            center: None,
            radius: None,
        };
        match d {
            Domain::Interval { l, r } => {
                j.kind = "interval";
                j.l = Some(*l);
                j.r = Some(*r);
            }
            Domain::Box { lo, hi } => {
                j.kind = "box";
                j.lo = Some(lo.as_slice().to_vec());
                j.hi = Some(hi.as_slice().to_vec());
            }
            Domain::Ball { center, radius } => {
                j.kind = "ball";
                j.center = Some(center.as_slice().to_vec());
                j.radius = Some(*radius);
            }
        }
        j
    }
}

#[derive(Serialize)]
pub struct LawJson {
    pub eps: f64,
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub freqs: Vec<f64>,
    pub ci: Vec<f64>,
    pub unclassified: u64,
    pub n_total: u64,
    pub warnings: Vec<String>,
}

impl From<&SelectionLaw> for LawJson {
    fn from(l: &SelectionLaw) -> Self {
        LawJson {
            eps: l.epsilon,
            labels: l.labels.clone(),
            counts: l.counts.clone(),
            freqs: l.frequencies(),
            ci: l.ci95(),
            unclassified: l.unclassified,
            n_total: l.n_total,
            warnings: l.warnings(),
        }
    }
}

#[derive(Serialize)]
pub struct SweepVerdictsJson {
    pub last_change: Option<f64>,
    pub stabilized: bool,
    pub exit_gaps: Vec<f64>,
    pub exit_gap_shrinking: Option<bool>,
    pub law_gaps: Vec<f64>,
    pub law_gap_non_increasing: Option<bool>,
}

#[derive(Serialize)]
pub struct SweepJson {
    pub field: String,
    pub domain: DomainJson,
    pub epsilons: Vec<f64>,
    pub laws: Vec<LawJson>,
    pub mean_exit: Vec<SummaryJson>,
    pub v_k_reference: Option<f64>,
    pub target: Vec<(String, f64)>,
    pub verdicts: SweepVerdictsJson,
}

impl From<&SweepResult> for SweepJson {
    fn from(s: &SweepResult) -> Self {
        let v = &s.verdicts;
        SweepJson {
            field: s.field.clone(),
            domain: (&s.domain).into(),
            epsilons: s.epsilons.clone(),
            laws: s.laws.iter().map(Into::into).collect(),
            mean_exit: s.mean_exit.iter().map(Into::into).collect(),
            v_k_reference: s.v_k_reference,
            target: s.target.clone(),
            verdicts: SweepVerdictsJson {
                last_change: finite(v.last_change),
                stabilized: v.stabilized,
                exit_gaps: v.exit_gaps.clone(),
                exit_gap_shrinking: v.exit_gap_shrinking,
                law_gaps: v.law_gaps.clone(),
                law_gap_non_increasing: v.law_gap_non_increasing,
            },
        }
    }
}

#[derive(Serialize)]
pub struct ChiSquareJson {
    pub counts: Vec<u64>,
    pub expected: f64,
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub level: f64,
    pub passed: bool,
}

impl From<&ChiSquareReport> for ChiSquareJson {
    fn from(r: &ChiSquareReport) -> Self {
        ChiSquareJson {
            counts: r.counts.clone(),
            expected: r.expected,
            statistic: r.statistic,
            dof: r.dof,
            critical: r.critical,
            level: zeronoise_core::experiments::CHI_SQUARE_LEVEL,
            passed: r.passed,
        }
    }
}

#[derive(Serialize)]
pub struct IdentityJson {
    pub monte_carlo: SummaryJson,
    pub exit_time_function: f64,
    pub hjb1: f64,
    pub gaps: Vec<(String, String, f64)>,
    pub max_pairwise_gap: f64,
}

impl From<&IdentityReport> for IdentityJson {
    fn from(r: &IdentityReport) -> Self {
        IdentityJson {
            monte_carlo: (&r.monte_carlo).into(),
            exit_time_function: r.exit_time_function,
            hjb1: r.hjb1,
            gaps: r.gaps().iter().map(|(a, b, g)| (a.to_string(), b.to_string(), *g)).collect(),
            max_pairwise_gap: r.max_pairwise_gap,
        }
    }
}

#[derive(Serialize)]
pub struct AssumptionJson {
    pub assumption: String,
    pub passed: bool,
    pub statistic: f64,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

impl From<&AssumptionReport> for AssumptionJson {
    fn from(r: &AssumptionReport) -> Self {
        AssumptionJson {
            assumption: r.assumption.to_string(),
            passed: r.passed,
            statistic: r.statistic,
            witness: r.witness.map(|p| p.as_slice().to_vec()),
            detail: r.detail.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct ExitJson {
    pub time: f64,
    pub point: Vec<f64>,
    pub label: Option<String>,
}

impl From<&ExitRecord> for ExitJson {
    fn from(e: &ExitRecord) -> Self {
        ExitJson {
            time: e.time,
            point: e.point.as_slice().to_vec(),
            label: e.label.clone(),
        }
    }
}
