//! Experiment configuration documents.
//!
//! A configuration is one JSON object; unknown keys are rejected so typos
//! surface as parse errors with line and column. Every float round-trips
//! bit-exactly through [`ExperimentConfig::to_json`] and
//! [`ExperimentConfig::from_json`].

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use zeronoise_core::hjb::{Hjb1Options, Hjb2Method, Hjb2Options};
use zeronoise_core::{registry_get, DriftField, NoiseMode, Point, SdeConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub label: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { l: f64, r: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSpec {
    Independent,
    Common,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSpec {
    /// Strictly decreasing list; single-ε commands use the last entry.
    pub epsilons: Vec<f64>,
    pub step: f64,
    pub horizon: f64,
    pub noise_mode: NoiseSpec,
    pub master_seed: u64,
    pub n_paths: usize,
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    Auto,
    Sor,
    Tridiagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_iters: usize,
    pub omega: f64,
    pub method: MethodSpec,
}

impl Default for GridSpec {
    fn default() -> Self {
        let o = Hjb2Options::default();
        GridSpec {
            h: 1e-3,
            tol: 1e-10,
            max_sweeps: Hjb1Options::default().max_sweeps,
            max_iters: o.max_iter,
            omega: o.omega,
            method: MethodSpec::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSpec {
    pub step: f64,
    pub horizon: f64,
    pub n_directions: usize,
}

impl Default for OdeSpec {
    fn default() -> Self {
        OdeSpec {
            step: 1e-4,
            horizon: 4.0,
            n_directions: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub field: FieldSpec,
    pub domain: DomainSpec,
    pub sde: SdeSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub ode: OdeSpec,
    /// Start point; the origin when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Nearest-member classification radius; `5% · diameter(K)` when absent.
    #[serde(default)]
    pub match_tol: Option<f64>,
    /// Quadrature panels for the 1D oracle.
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
}

fn default_n_quad() -> usize {
    20_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("malformed experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked before computing: labels,
    /// parameters, dimensions and numeric ranges.
    pub fn validate(&self) -> Result<()> {
        let field = self.drift()?;
        let domain = self.domain()?;
        if field.dim() != domain.dim() {
            bail!("field `{}` has dimension {} but the domain has dimension {}", field.label(), field.dim(), domain.dim());
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != domain.dim() {
                bail!("x0 has {} coordinates, the domain has dimension {}", x0.len(), domain.dim());
            }
        }
        let s = &self.sde;
        if s.epsilons.is_empty() {
            bail!("sde.epsilons must not be empty");
        }
        if s.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            bail!("sde.epsilons must be finite and nonnegative: {:?}", s.epsilons);
        }
        if s.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            bail!("sde.epsilons must be strictly decreasing: {:?}", s.epsilons);
        }
        if s.n_paths == 0 {
            bail!("sde.n_paths must be positive");
        }
        self.sde_config(s.epsilons[0]).validate().map_err(|e| anyhow::anyhow!("sde: {e}"))?;
        let g = &self.grid;
        if !(g.h > 0.0 && g.tol > 0.0 && g.omega > 0.0 && g.omega < 2.0) || g.max_sweeps == 0 || g.max_iters == 0 {
            bail!("grid settings out of range: {g:?}");
        }
        if !(self.ode.step > 0.0 && self.ode.horizon >= 10.0 * self.ode.step) {
            bail!("ode.step must be positive and at most horizon/10: {:?}", self.ode);
        }
        if let Some(t) = self.match_tol {
            if !(t > 0.0) {
                bail!("match_tol must be positive, got {t}");
            }
        }
        Ok(())
    }

    pub fn drift(&self) -> Result<DriftField> {
        let params: Vec<(&str, f64)> = self.field.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        registry_get(&self.field.label, &params).map_err(|e| anyhow::anyhow!("field: {e}"))
    }

    pub fn domain(&self) -> Result<zeronoise_core::Domain> {
        use zeronoise_core::Domain;
        let point = |v: &[f64], what: &str| -> Result<Point> {
            if v.is_empty() || v.len() > zeronoise_core::MAX_DIM {
                bail!("domain.{what} must have 1 to {} coordinates", zeronoise_core::MAX_DIM);
            }
            Ok(Point::new(v))
        };
        let d = match &self.domain {
            DomainSpec::Interval { l, r } => Domain::interval(*l, *r),
            DomainSpec::Box { lo, hi } => Domain::cube(point(lo, "lo")?, point(hi, "hi")?),
            DomainSpec::Ball { center, radius } => Domain::ball(point(center, "center")?, *radius),
        };
        d.map_err(|e| anyhow::anyhow!("domain: {e}"))
    }

    pub fn x0(&self) -> Result<Point> {
        let dim = self.domain()?.dim();
        Ok(self.x0.as_deref().map_or(Point::zeros(dim), Point::new))
    }

    pub fn match_tol(&self) -> Result<f64> {
        Ok(match self.match_tol {
            Some(t) => t,
            None => zeronoise_core::experiments::default_match_tol(&self.domain()?),
        })
    }

    /// The smallest configured ε.
    pub fn epsilon(&self) -> f64 {
        *self.sde.epsilons.last().expect("validated nonempty")
    }

    pub fn sde_config(&self, epsilon: f64) -> SdeConfig {
        SdeConfig {
            epsilon,
            step: self.sde.step,
            horizon: self.sde.horizon,
            noise_mode: match self.sde.noise_mode {
                NoiseSpec::Independent => NoiseMode::Independent,
                NoiseSpec::Common => NoiseMode::Common,
            },
            master_seed: self.sde.master_seed,
            record_stride: self.sde.record_stride,
        }
    }

    pub fn hjb1_options(&self) -> Hjb1Options {
        Hjb1Options {
            h: self.grid.h,
            tol: self.grid.tol,
            max_sweeps: self.grid.max_sweeps,
            ..Hjb1Options::default()
        }
    }

    pub fn hjb2_options(&self, epsilon: f64) -> Hjb2Options {
        Hjb2Options {
            h: self.grid.h,
            epsilon,
            omega: self.grid.omega,
            tol: self.grid.tol,
            max_iter: self.grid.max_iters,
            method: match self.grid.method {
                MethodSpec::Auto => Hjb2Method::Auto,
                MethodSpec::Sor => Hjb2Method::Sor,
                MethodSpec::Tridiagonal => Hjb2Method::Tridiagonal,
            },
        }
    }

    /// The reduced configuration used by `--quick`: a tenth of the paths
    /// and a grid ten times coarser.
    pub fn quick(&self) -> Self {
        let mut c = self.clone();
        c.sde.n_paths = (c.sde.n_paths / 10).max(1);
        c.grid.h *= 10.0;
        c.n_quad = (c.n_quad / 10).max(100);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            field: FieldSpec {
                label: "ex2-asym".into(),
                params: BTreeMap::new(),
            },
            domain: DomainSpec::Interval { l: -0.5625, r: 0.0625 },
            sde: SdeSpec {
                epsilons: vec![0.05, 0.01],
                step: 1e-4,
                horizon: 5.0,
                noise_mode: NoiseSpec::Independent,
                master_seed: 3,
                n_paths: 100,
                record_stride: 1,
            },
            grid: GridSpec::default(),
            ode: OdeSpec::default(),
            x0: None,
            match_tol: None,
            n_quad: 20_000,
        }
    }

    #[test]
    fn parse_errors_name_line_and_field() {
        let text = sample().to_json().replace("\"step\"", "\"stpe\"");
        let err = format!("{:#}", ExperimentConfig::from_json(&text).unwrap_err());
        assert!(err.contains("stpe") && err.contains("line"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_rejected_before_running() {
        let mut c = sample();
        c.domain = DomainSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let err = format!("{:#}", c.validate().unwrap_err());
        assert!(err.contains("dimension"), "{err}");
        let mut c = sample();
        c.x0 = Some(vec![0.0, 0.0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_unsorted_epsilons_and_unknown_labels() {
        let mut c = sample();
        c.sde.epsilons = vec![0.01, 0.05];
        assert!(c.validate().is_err());
        let mut c = sample();
        c.field.label = "nope".into();
        let err = format!("{:#}", c.validate().unwrap_err());
        assert!(err.contains("ex1-sqrt"), "{err}");
    }

    #[test]
    fn quick_scales_paths_and_grid() {
        let q = sample().quick();
        assert_eq!(q.sde.n_paths, 10);
        assert!((q.grid.h - 1e-2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trips_bit_exactly(
            l in -10.0f64..-1e-9,
            r in 1e-9f64..10.0,
            eps in proptest::collection::vec(1e-6f64..1.0, 1..5),
            step in 1e-7f64..1e-3,
            seed in any::<u64>(),
            gamma in 0.01f64..0.99,
            h in 1e-5f64..0.1,
        ) {
            let mut c = sample();
            c.domain = DomainSpec::Interval { l, r };
            let mut eps = eps;
            eps.sort_by(|a, b| b.total_cmp(a));
            eps.dedup();
            c.sde.epsilons = eps;
            c.sde.step = step;
            c.sde.master_seed = seed;
            c.field.params.insert("gamma".into(), gamma);
            c.grid.h = h;
            let back: ExperimentConfig = serde_json::from_str(&c.to_json()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.sde.step.to_bits(), c.sde.step.to_bits());
            prop_assert_eq!(back.to_json(), c.to_json());
        }
    }
}
