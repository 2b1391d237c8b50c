//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use zeronoise_core::domain::{check_h3, check_h4};
use zeronoise_core::drift::check_h2;
use zeronoise_core::experiments::{epsilon_sweep, estimate_selection_law};
use zeronoise_core::hjb::{expected_exit_oracle_1d, expected_exit_profile_1d, solve_hjb1, solve_hjb2, HjbError};
use zeronoise_core::ode::{default_delta, enumerate_leaving, exit_functional, exit_time_function, integrate_ode};
use zeronoise_core::sde::{simulate_path, EnsembleRunner};
use zeronoise_core::{LeavingSolutionSet, Point};

use crate::config::ExperimentConfig;
use crate::io::{self, write_json, write_text, AssumptionJson, ExitJson, GridMeta, LawJson, SummaryJson, SweepJson};
use crate::reproduce::{self, RunOptions, NAMES};
use crate::runner::ParallelRunner;

/// Overrides `--out` when set.
pub const OUT_ENV: &str = "ZERONOISE_OUT";

#[derive(Parser, Debug)]
#[command(name = "zeronoise", version, about = "Zero-noise selection experiments for non-Lipschitz ODEs")]
pub struct Cli {
    /// Output directory (the ZERONOISE_OUT environment variable takes precedence).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for Monte Carlo ensembles; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// A tenth of the paths, grids ten times coarser, wider tolerances.
    #[arg(long, global = true)]
    pub quick: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EpsArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Noise level; defaults to the smallest configured ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Euler–Maruyama ensemble at one ε: ensemble.csv, summary.json and
    /// the first path as path.csv.
    Simulate(EpsArgs),
    /// RK4 path from x0: path.csv and exit.json.
    Ode(ConfigArgs),
    /// Numerical leaving solutions from the origin: leaving.json.
    Leaving(ConfigArgs),
    /// First-order exit-time grid: hjb1.csv and hjb1.meta.json.
    Hjb1(ConfigArgs),
    /// Second-order expected-exit-time grid: hjb2.csv and hjb2.meta.json.
    Hjb2(EpsArgs),
    /// One-dimensional expected exit time by quadrature: oracle1d.csv and
    /// oracle1d.json.
    Oracle1d(EpsArgs),
    /// Empirical law over leaving branches at one ε: law.json.
    SelectionLaw(EpsArgs),
    /// Selection laws and mean exit times along all configured ε: sweep.json.
    Sweep(ConfigArgs),
    /// Numerical checks of the standing assumptions: assumptions.json.
    CheckAssumptions(ConfigArgs),
    /// Pinned reproduction with verdicts, or `all`.
    Reproduce {
        /// One of example1, example24, example25, remark26, example27, all.
        name: String,
    },
}

/// Parses `args` and runs the subcommand. Errors are printed to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// The effective output directory.
pub fn out_dir(cli: &Cli) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cli.out.clone(),
    }
}

fn load(args: &ConfigArgs, quick: bool) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(&args.config)?;
    Ok(if quick { cfg.quick() } else { cfg })
}

fn eps_of(cfg: &ExperimentConfig, arg: Option<f64>) -> Result<f64> {
    let eps = arg.unwrap_or_else(|| cfg.epsilon());
    if !(eps.is_finite() && eps > 0.0) {
        bail!("--epsilon must be positive and finite, got {eps}");
    }
    Ok(eps)
}

fn leaving_for(cfg: &ExperimentConfig) -> Result<LeavingSolutionSet> {
    let field = cfg.drift()?;
    let domain = cfg.domain()?;
    let ls = LeavingSolutionSet::from_analytic(&field, cfg.ode.horizon, cfg.ode.step, cfg.ode.n_directions)?;
    let ls = if ls.members.is_empty() {
        enumerate_leaving(&field, cfg.ode.n_directions, default_delta(&domain), cfg.ode.horizon, cfg.ode.step)?
    } else {
        ls
    };
    Ok(ls.with_exits(&domain))
}

#[derive(Serialize)]
struct LeavingJson {
    field: String,
    diagnostic: Option<String>,
    members: Vec<MemberJson>,
}

#[derive(Serialize)]
struct MemberJson {
    label: String,
    description: String,
    direction: Vec<f64>,
    exit: Option<ExitJson>,
}

#[derive(Serialize)]
struct OracleJson {
    x0: f64,
    epsilon: f64,
    n_quad: usize,
    value: f64,
}

#[derive(Serialize)]
struct OdeExitJson {
    x0: Vec<f64>,
    exit: Option<ExitJson>,
    exit_time_function: Option<f64>,
}

/// Runs the parsed command. `Ok(false)` means a verdict or check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let out = out_dir(cli);
    std::fs::create_dir_all(&out)?;
    let f = |name: &str| out.join(name);
    match &cli.command {
        Command::Simulate(a) => {
            let cfg = load(&a.config, cli.quick)?;
            let (field, domain, x0) = (cfg.drift()?, cfg.domain()?, cfg.x0()?);
            let sde = cfg.sde_config(eps_of(&cfg, a.epsilon)?);
            warn(&sde.warnings());
            let ens = ParallelRunner::new(cli.jobs)?.run(&field, &domain, &sde, cfg.sde.n_paths, &x0)?;
            let path = simulate_path(&field, &domain, &sde, 0, &x0)?;
            write_text(&f("ensemble.csv"), &io::ensemble_csv(&ens, domain.dim()))?;
            write_text(&f("path.csv"), &io::path_csv(&path))?;
            write_json(&f("summary.json"), &SummaryJson::from(&ens.summary))?;
        }
        Command::Ode(a) => {
            let cfg = load(a, cli.quick)?;
            let (field, domain, x0) = (cfg.drift()?, cfg.domain()?, cfg.x0()?);
            // The origin is ambiguous: report V_K and the fastest leaving branch.
            let (path, vk) = if x0.is_origin() {
                let ls = leaving_for(&cfg)?;
                let vk = exit_time_function(&field, &domain, &ls, &x0, cfg.ode.horizon, cfg.ode.step)?;
                let Some(best) = ls.optimal(&domain, cfg.ode.step).into_iter().next() else {
                    bail!("no leaving branch exits the domain within the horizon");
                };
                (best.path.clone(), Some(vk))
            } else {
                let mut path = integrate_ode(&field, &x0, cfg.ode.horizon, cfg.ode.step)?;
                path.exit = exit_functional(&path, &domain);
                (path, None)
            };
            write_text(&f("path.csv"), &io::path_csv(&path))?;
            write_json(
                &f("exit.json"),
                &OdeExitJson {
                    x0: x0.as_slice().to_vec(),
                    exit: path.exit.as_ref().map(ExitJson::from),
                    exit_time_function: vk,
                },
            )?;
        }
        Command::Leaving(a) => {
            let cfg = load(a, cli.quick)?;
            let (field, domain) = (cfg.drift()?, cfg.domain()?);
            let ls = enumerate_leaving(&field, cfg.ode.n_directions, default_delta(&domain), cfg.ode.horizon, cfg.ode.step)?
                .with_exits(&domain);
            let json = LeavingJson {
                field: ls.origin_field.clone(),
                diagnostic: ls.diagnostic.clone(),
                members: ls
                    .members
                    .iter()
                    .map(|m| MemberJson {
                        label: m.label.clone(),
                        description: m.description.clone(),
                        direction: m.direction.as_slice().to_vec(),
                        exit: m.path.exit.as_ref().map(ExitJson::from),
                    })
                    .collect(),
            };
            write_json(&f("leaving.json"), &json)?;
        }
        Command::Hjb1(a) => {
            let cfg = load(a, cli.quick)?;
            let g = match solve_hjb1(&cfg.drift()?, &cfg.domain()?, &cfg.hjb1_options()) {
                Ok(g) => g,
                Err(HjbError::NonConvergence { sweeps, max_update, residual }) => {
                    write_grid(&out, "hjb1_residual", &residual)?;
                    bail!("first-order sweeps did not converge after {sweeps} sweeps (last update {max_update:e}); residual field written");
                }
                Err(e) => return Err(e.into()),
            };
            warn(&g.warnings);
            write_grid(&out, "hjb1", &g)?;
        }
        Command::Hjb2(a) => {
            let cfg = load(&a.config, cli.quick)?;
            let g = solve_hjb2(&cfg.drift()?, &cfg.domain()?, &cfg.hjb2_options(eps_of(&cfg, a.epsilon)?))?;
            warn(&g.warnings);
            write_grid(&out, "hjb2", &g)?;
        }
        Command::Oracle1d(a) => {
            let cfg = load(&a.config, cli.quick)?;
            let (field, domain, x0) = (cfg.drift()?, cfg.domain()?, cfg.x0()?);
            if domain.dim() != 1 {
                bail!("oracle1d needs a one-dimensional domain");
            }
            let eps = eps_of(&cfg, a.epsilon)?;
            let (lo, hi) = domain.bounding_box();
            let n = ((hi[0] - lo[0]) / cfg.grid.h).round().max(1.0) as usize;
            let n = n.max(2);
            let xs: Vec<f64> = (0..=n).map(|k| lo[0] + (hi[0] - lo[0]) * k as f64 / n as f64).collect();
            // Zero on the boundary; the quadrature only takes interior points.
            let mut us = vec![0.0];
            us.extend(expected_exit_profile_1d(&field, &domain, &xs[1..n], eps, cfg.n_quad)?);
            us.push(0.0);
            let mut csv = String::from("x,u\n");
            for (x, u) in xs.iter().zip(&us) {
                csv.push_str(&format!("{},{}\n", io::fmt_f64(*x), io::fmt_f64(*u)));
            }
            write_text(&f("oracle1d.csv"), &csv)?;
            let value = expected_exit_oracle_1d(&field, &domain, x0[0], eps, cfg.n_quad)?;
            write_json(
                &f("oracle1d.json"),
                &OracleJson {
                    x0: x0[0],
                    epsilon: eps,
                    n_quad: cfg.n_quad,
                    value,
                },
            )?;
        }
        Command::SelectionLaw(a) => {
            let cfg = load(&a.config, cli.quick)?;
            let sde = cfg.sde_config(eps_of(&cfg, a.epsilon)?);
            warn(&sde.warnings());
            let (law, ens) = estimate_selection_law(
                &ParallelRunner::new(cli.jobs)?,
                &cfg.drift()?,
                &cfg.domain()?,
                &sde,
                cfg.sde.n_paths,
                &leaving_for(&cfg)?,
                cfg.match_tol()?,
            )?;
            warn(&law.warnings());
            write_json(&f("law.json"), &LawJson::from(&law))?;
            write_json(&f("summary.json"), &SummaryJson::from(&ens.summary))?;
        }
        Command::Sweep(a) => {
            let cfg = load(a, cli.quick)?;
            let (field, domain) = (cfg.drift()?, cfg.domain()?);
            let leaving = leaving_for(&cfg)?;
            let origin = Point::zeros(domain.dim());
            let vk = exit_time_function(&field, &domain, &leaving, &origin, cfg.ode.horizon, cfg.ode.step)?;
            let sweep = epsilon_sweep(
                &ParallelRunner::new(cli.jobs)?,
                &field,
                &domain,
                &cfg.sde_config(cfg.epsilon()),
                &cfg.sde.epsilons,
                cfg.sde.n_paths,
                &leaving,
                cfg.match_tol()?,
                vk.is_finite().then_some(vk),
            )?;
            write_json(&f("sweep.json"), &SweepJson::from(&sweep))?;
        }
        Command::CheckAssumptions(a) => {
            let cfg = load(a, cli.quick)?;
            let (field, domain) = (cfg.drift()?, cfg.domain()?);
            let reports = vec![
                check_h2(&field, 0.5 * domain.max_norm(), 1024),
                check_h3(&domain, &leaving_for(&cfg)?, cfg.match_tol()?)?,
                check_h4(&domain, &field, 1024)?,
            ];
            let json: Vec<AssumptionJson> = reports.iter().map(AssumptionJson::from).collect();
            write_json(&f("assumptions.json"), &json)?;
            for r in &reports {
                eprintln!("{} {}: {}", r.assumption, if r.passed { "holds" } else { "FAILS" }, r.detail);
            }
            return Ok(reports.iter().all(|r| r.passed));
        }
        Command::Reproduce { name } => {
            let names: Vec<&str> = if name == "all" { NAMES.to_vec() } else { vec![name.as_str()] };
            let opts = RunOptions {
                quick: cli.quick,
                jobs: cli.jobs,
                out_dir: out.clone(),
            };
            let mut ok = true;
            for n in names {
                let table = reproduce::run(n, &opts)?;
                println!("{table}");
                ok &= table.all_passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn write_grid(out: &FsPath, stem: &str, g: &zeronoise_core::hjb::GridField) -> Result<()> {
    write_text(&out.join(format!("{stem}.csv")), &io::grid_csv(g))?;
    write_json(&out.join(format!("{stem}.meta.json")), &GridMeta::from(g))
}

fn warn(ws: &[String]) {
    for w in ws {
        eprintln!("warning: {w}");
    }
}
