//! Pinned reproduction runs.
//!
//! Each name maps to a fixed configuration and a list of verdicts that
//! compare measured values with closed-form references. Artifacts go to
//! `<out>/<name>/`.
//!
//! Under `--quick` the path count drops tenfold and grids are ten times
//! coarser. Monte Carlo tolerances then widen by `√10` (the growth of a
//! binomial or sample-mean standard error) and first-order grid
//! tolerances by `10` (error linear in `h`). Tolerances of the form
//! `max(5e-3, 10h)` adapt through `h` directly.

use std::f64::consts::SQRT_2;
use std::path::{Path as FsPath, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use zeronoise_core::experiments::{
    angle_uniformity_test, epsilon_sweep, estimate_selection_law, IdentityReport, SelectionLaw,
};
use zeronoise_core::hjb::{expected_exit_profile_1d, solve_hjb1, solve_hjb2, GridField, Hjb2Method};
use zeronoise_core::ode::{exit_functional, exit_time_function, integrate_ode};
use zeronoise_core::rng::NoiseStream;
use zeronoise_core::sde::EnsembleRunner;
use zeronoise_core::{registry_get, Domain, DriftField, LeavingSolutionSet, Point};

use crate::config::{DomainSpec, ExperimentConfig, FieldSpec, GridSpec, NoiseSpec, OdeSpec, SdeSpec};
use crate::io::{self, write_json, write_text, ChiSquareJson, GridMeta, IdentityJson, LawJson, SummaryJson, SweepJson};
use crate::runner::ParallelRunner;
use crate::verdict::{Status, Verdict, VerdictTable};

pub const NAMES: [&str; 5] = ["example1", "example24", "example25", "remark26", "example27"];

/// Tolerance factor for Monte Carlo verdicts under `--quick`.
pub const QUICK_MC_FACTOR: f64 = 3.162_277_660_168_379_5;
/// Tolerance factor for first-order grid verdicts under `--quick`.
pub const QUICK_GRID_FACTOR: f64 = 10.0;

/// `r` of the asymmetric example; `K = [-9r/4, r/4]` and `V_K(0) = √r`.
const R_ASYM: f64 = 0.25;
/// Radius of the ball for the product example.
const R_PROD: f64 = 0.25;
/// Expected exit time from the origin of the radial example at `ε = 0.02`,
/// from the radial generator `(ε²/2)(u'' + u'/r) + 2√r u' = -1`. Two
/// independent computations (a double quadrature of the Green's function
/// and a stiff shooting solve) agree to 1e-11.
const RADIAL_EXPECTED_EXIT_EPS002: f64 = 0.942_652_572_43;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub quick: bool,
    pub jobs: usize,
    pub out_dir: PathBuf,
}

fn base(name: &str, label: &str, domain: DomainSpec, epsilons: Vec<f64>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_owned(),
        field: FieldSpec {
            label: label.to_owned(),
            params: Default::default(),
        },
        domain,
        sde: SdeSpec {
            epsilons,
            step: 1e-4,
            horizon: 5.0,
            noise_mode: NoiseSpec::Independent,
            master_seed: seed,
            n_paths: 20_000,
            record_stride: 1,
        },
        grid: GridSpec::default(),
        ode: OdeSpec::default(),
        x0: None,
        match_tol: None,
        n_quad: 20_000,
    }
}

/// The pinned configuration for `name`.
pub fn pinned(name: &str) -> Result<ExperimentConfig> {
    let ball = |r: f64| DomainSpec::Ball {
        center: vec![0.0, 0.0],
        radius: r,
    };
    let cfg = match name {
        "example1" => {
            let mut c = base(name, "ex1-sqrt", DomainSpec::Interval { l: -1.0, r: 1.0 }, vec![0.01], 1);
            c.grid.h = 2e-4;
            c
        }
        "example24" => base(
            name,
            "ex2-asym",
            DomainSpec::Interval {
                l: -2.25 * R_ASYM,
                r: 0.25 * R_ASYM,
            },
            vec![0.05, 0.02, 0.01],
            24,
        ),
        "example25" | "remark26" => {
            let mut c = base(name, "prod2d", ball(R_PROD), vec![0.005], if name == "example25" { 25 } else { 26 });
            c.sde.step = 2.5e-5;
            c.sde.horizon = 3.0;
            if name == "remark26" {
                c.sde.noise_mode = NoiseSpec::Common;
            }
            c
        }
        "example27" => {
            let mut c = base(name, "radial2d", ball(1.0), vec![0.02], 27);
            c.grid.h = 5e-3;
            c
        }
        other => bail!("unknown reproduction `{other}`; expected one of {}", NAMES.join(", ")),
    };
    cfg.validate()?;
    Ok(cfg)
}

struct Ctx {
    cfg: ExperimentConfig,
    quick: bool,
    runner: ParallelRunner,
    dir: PathBuf,
    field: DriftField,
    domain: Domain,
}

impl Ctx {
    fn mc(&self, tol: f64) -> f64 {
        if self.quick {
            tol * QUICK_MC_FACTOR
        } else {
            tol
        }
    }

    fn grid(&self, tol: f64) -> f64 {
        if self.quick {
            tol * QUICK_GRID_FACTOR
        } else {
            tol
        }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn leaving(&self) -> Result<LeavingSolutionSet> {
        let ls = LeavingSolutionSet::from_analytic(&self.field, self.cfg.ode.horizon, self.cfg.ode.step, self.cfg.ode.n_directions)?;
        Ok(ls.with_exits(&self.domain))
    }

    fn law(&self) -> Result<(SelectionLaw, zeronoise_core::sde::Ensemble)> {
        let leaving = self.leaving()?;
        let sde = self.cfg.sde_config(self.cfg.epsilon());
        let (law, ens) = estimate_selection_law(
            &self.runner,
            &self.field,
            &self.domain,
            &sde,
            self.cfg.sde.n_paths,
            &leaving,
            self.cfg.match_tol()?,
        )?;
        write_text(&self.file("ensemble.csv"), &io::ensemble_csv(&ens, self.domain.dim()))?;
        write_json(&self.file("summary.json"), &SummaryJson::from(&ens.summary))?;
        write_json(&self.file("law.json"), &LawJson::from(&law))?;
        Ok((law, ens))
    }

    fn write_grid(&self, stem: &str, g: &GridField) -> Result<()> {
        write_text(&self.file(&format!("{stem}.csv")), &io::grid_csv(g))?;
        write_json(&self.file(&format!("{stem}.meta.json")), &GridMeta::from(g))
    }
}

/// Runs the pinned reproduction `name`, writes its artifacts and the
/// verdict JSON, and returns the verdict table.
pub fn run(name: &str, opts: &RunOptions) -> Result<VerdictTable> {
    let pinned = pinned(name)?;
    let cfg = if opts.quick { pinned.quick() } else { pinned };
    let dir = opts.out_dir.join(name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_text(&dir.join("config.json"), &format!("{}\n", cfg.to_json()))?;
    let ctx = Ctx {
        field: cfg.drift()?,
        domain: cfg.domain()?,
        runner: ParallelRunner::new(opts.jobs)?,
        quick: opts.quick,
        dir,
        cfg,
    };
    let verdicts = match name {
        "example1" => example1(&ctx)?,
        "example24" => example24(&ctx)?,
        "example25" => example25(&ctx)?,
        "remark26" => remark26(&ctx)?,
        "example27" => example27(&ctx)?,
        _ => unreachable!("validated by pinned()"),
    };
    let table = VerdictTable::new(name, opts.quick, verdicts);
    write_json(&ctx.file("verdicts.json"), &table)?;
    Ok(table)
}

#[derive(Serialize)]
struct OracleCheck {
    field: String,
    epsilon: f64,
    h: f64,
    sup_error: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct GapSweep {
    hjb1_origin: f64,
    epsilons: Vec<f64>,
    hjb2_origin: Vec<f64>,
    gaps: Vec<f64>,
}

fn example1(ctx: &Ctx) -> Result<Vec<Verdict>> {
    let (law, _) = ctx.law()?;
    let tol = ctx.mc(0.03);
    let mut v = vec![];
    for label in ["+branch", "-branch"] {
        v.push(Verdict::within(
            &format!("law.{label}"),
            &format!("frequency of {label} at eps = {}", law.epsilon),
            law.frequency(label).unwrap_or(0.0),
            0.5,
            "1/2",
            tol,
        ));
    }
    v.push(Verdict::at_most("law.unclassified", "unclassified fraction", law.unclassified_fraction(), 0.05));

    // Second-order grid against the quadrature oracle.
    let h = ctx.cfg.grid.h;
    let interval = Domain::interval(-1.0, 1.0)?;
    let zero = registry_get("zero", &[])?;
    let mut checks = vec![];
    for (name, field) in [("zero", &zero), ("ex1-sqrt", &ctx.field)] {
        for eps in [1.0, 0.5, 0.2] {
            let mut o = ctx.cfg.hjb2_options(eps);
            o.method = Hjb2Method::Tridiagonal;
            let g = solve_hjb2(field, &interval, &o)?;
            let (xs, us): (Vec<f64>, Vec<f64>) = g.interior_nodes().map(|(p, u)| (p[0], u)).unzip();
            let exact = expected_exit_profile_1d(field, &interval, &xs, eps, ctx.cfg.n_quad)?;
            let sup = us.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let tol = f64::max(5e-3, 10.0 * h);
            v.push(Verdict::at_most(
                &format!("hjb2.oracle.{name}.eps{eps}"),
                &format!("sup |grid - quadrature| for {name}, eps = {eps}, h = {h}"),
                sup,
                tol,
            ));
            checks.push(OracleCheck {
                field: name.to_owned(),
                epsilon: eps,
                h,
                sup_error: sup,
                tolerance: tol,
            });
            if name == "zero" && eps == 1.0 {
                let u0 = g.value_near(&Point::scalar(0.0)).unwrap_or(f64::NAN);
                v.push(Verdict::within("hjb2.brownian.origin", "u(0) for b = 0, eps = 1 (exact 1 - x^2)", u0, 1.0, "1", 1e-8));
                ctx.write_grid("hjb2_zero_eps1", &g)?;
            }
        }
    }
    write_json(&ctx.file("hjb2_oracle.json"), &checks)?;

    // Vanishing-noise gap between the second- and first-order solutions.
    let g1 = solve_hjb1(&ctx.field, &interval, &ctx.cfg.hjb1_options())?;
    let u1 = g1.value_near(&Point::scalar(0.0)).unwrap_or(f64::NAN);
    ctx.write_grid("hjb1", &g1)?;
    let epsilons = vec![0.2, 0.1, 0.05];
    let mut u2s = vec![];
    for &eps in &epsilons {
        let mut o = ctx.cfg.hjb2_options(eps);
        o.h = o.h.min(1e-4);
        let g2 = solve_hjb2(&ctx.field, &interval, &o)?;
        u2s.push(g2.value_near(&Point::scalar(0.0)).unwrap_or(f64::NAN));
    }
    let gaps: Vec<f64> = u2s.iter().map(|u| (u - u1).abs()).collect();
    v.push(Verdict::within("hjb1.origin", "first-order u(0)", u1, 1.0, "V_K(0) = 1", ctx.grid(2e-3)));
    v.push(Verdict::holds(
        "hjb2.gap.decreasing",
        "|u_eps(0) - u(0)| decreases along eps = 0.2, 0.1, 0.05",
        gaps.windows(2).all(|w| w[1] < w[0]),
    ));
    v.push(Verdict::at_most("hjb2.gap.final", "|u_eps(0) - u(0)| at eps = 0.05", gaps[2], 0.1));
    v.push(Verdict::holds("hjb2.eps005.lower", "u_eps(0) >= 0.9 at eps = 0.05", u2s[2] >= 0.9));
    write_json(
        &ctx.file("hjb_gap.json"),
        &GapSweep {
            hjb1_origin: u1,
            epsilons,
            hjb2_origin: u2s,
            gaps,
        },
    )?;
    Ok(v)
}

fn example24(ctx: &Ctx) -> Result<Vec<Verdict>> {
    let leaving = ctx.leaving()?;
    let origin = Point::scalar(0.0);
    let vk = exit_time_function(&ctx.field, &ctx.domain, &leaving, &origin, ctx.cfg.ode.horizon, ctx.cfg.ode.step)?;
    let base = ctx.cfg.sde_config(ctx.cfg.epsilon());
    let sweep = epsilon_sweep(
        &ctx.runner,
        &ctx.field,
        &ctx.domain,
        &base,
        &ctx.cfg.sde.epsilons,
        ctx.cfg.sde.n_paths,
        &leaving,
        ctx.cfg.match_tol()?,
        Some(vk),
    )?;
    write_json(&ctx.file("sweep.json"), &SweepJson::from(&sweep))?;
    let last = sweep.laws.last().expect("nonempty sweep");
    let t = 9f64.cbrt();
    let tol = ctx.mc(0.03);
    let trend = sweep.verdicts.law_gap_non_increasing.unwrap_or(false);
    let mut v = vec![];
    for (label, target, text) in [
        ("-branch", t / (1.0 + t), "3^(2/3)/(1+3^(2/3))"),
        ("+branch", 1.0 / (1.0 + t), "1/(1+3^(2/3))"),
    ] {
        let mut verdict = Verdict::within(
            &format!("law.{label}"),
            &format!("frequency of {label} at eps = {}", last.epsilon),
            last.frequency(label).unwrap_or(0.0),
            target,
            &format!("{text} = {target:.6}"),
            tol,
        );
        if verdict.status == Status::Fail && trend {
            verdict.status = Status::Converging;
            verdict = verdict.with_note("outside tolerance but the gap to the target shrinks along the sweep");
        }
        v.push(verdict);
    }
    v.push(Verdict::holds(
        "law.gap.non_increasing",
        "distance to the stated law never grows by more than 2 CI along the sweep",
        trend,
    ));

    // First-order grid on the narrow and the balanced domain.
    let narrow = Domain::interval(-0.25, 0.25)?;
    let g_narrow = solve_hjb1(&ctx.field, &narrow, &ctx.cfg.hjb1_options())?;
    let g_bal = solve_hjb1(&ctx.field, &ctx.domain, &ctx.cfg.hjb1_options())?;
    ctx.write_grid("hjb1_narrow", &g_narrow)?;
    ctx.write_grid("hjb1", &g_bal)?;
    let u_narrow = g_narrow.value_near(&origin).unwrap_or(f64::NAN);
    let u_bal = g_bal.value_near(&origin).unwrap_or(f64::NAN);
    v.push(Verdict::within("hjb1.narrow", "u(0) on [-1/4, 1/4]", u_narrow, 1.0 / 3.0, "1/3", ctx.grid(2e-3)));
    v.push(Verdict::within("hjb1.balanced", "u(0) on [-9r/4, r/4], r = 1/4", u_bal, R_ASYM.sqrt(), "sqrt(r) = 0.5", ctx.grid(5e-3)));

    // The three exit-time estimates agree.
    let mc = sweep.mean_exit.last().expect("nonempty sweep").clone();
    let id = IdentityReport::new(mc, vk, u_bal);
    write_json(&ctx.file("identity.json"), &IdentityJson::from(&id))?;
    let tol = ctx.mc(0.03);
    let sr = R_ASYM.sqrt();
    v.push(Verdict::within("identity.monte_carlo", "mean exit time at the smallest eps", id.monte_carlo.mean_exit, sr, "sqrt(r)", tol));
    v.push(Verdict::within("identity.exit_time_function", "min exit time over leaving solutions", vk, sr, "sqrt(r)", tol));
    v.push(Verdict::within("identity.hjb1", "first-order grid at the origin", u_bal, sr, "sqrt(r)", tol));
    v.push(Verdict::at_most("identity.pairwise", "largest pairwise gap of the three estimates", id.max_pairwise_gap, tol));
    Ok(v)
}

/// Exit time of the diagonal branches `(±t², ±t²)` from `B(0, r)`.
pub fn product_exit_time(r: f64) -> f64 {
    (r / SQRT_2).sqrt()
}

fn product_common(ctx: &Ctx, law: &SelectionLaw, mean_exit: f64) -> Verdict {
    let t_star = product_exit_time(R_PROD);
    Verdict::within(
        "exit_time",
        &format!("mean exit time at eps = {}", law.epsilon),
        mean_exit,
        t_star,
        &format!("(r/sqrt(2))^(1/2) = {t_star:.6}"),
        ctx.mc(0.02),
    )
}

fn example25(ctx: &Ctx) -> Result<Vec<Verdict>> {
    let (law, ens) = ctx.law()?;
    let tol = ctx.mc(0.03);
    let mut v: Vec<Verdict> = ["X1", "X2", "X3", "X4"]
        .iter()
        .map(|l| Verdict::within(&format!("law.{l}"), &format!("frequency of {l}, independent noise"), law.frequency(l).unwrap_or(0.0), 0.25, "1/4", tol))
        .collect();
    v.push(product_common(ctx, &law, ens.summary.mean_exit));
    Ok(v)
}

fn remark26(ctx: &Ctx) -> Result<Vec<Verdict>> {
    let (law, ens) = ctx.law()?;
    let f = |l: &str| law.frequency(l).unwrap_or(0.0);
    let tol = ctx.mc(0.03);
    let mut v = vec![
        Verdict::within("law.X1", "frequency of X1 = (t^2, t^2), common noise", f("X1"), 0.5, "1/2", tol),
        Verdict::within("law.X4", "frequency of X4 = (-t^2, -t^2), common noise", f("X4"), 0.5, "1/2", tol),
        Verdict::at_most("law.off_diagonal", "frequency of X2 and X3 together", f("X2") + f("X3"), 0.02),
        product_common(ctx, &law, ens.summary.mean_exit),
    ];
    let records: Vec<_> = ens.exits().cloned().collect();
    let chi = angle_uniformity_test(&records, 4)?;
    write_json(&ctx.file("quadrant_chi_square.json"), &ChiSquareJson::from(&chi))?;
    v.push(
        Verdict::holds("quadrants.not_uniform", "chi-square over the four quadrants rejects uniformity", !chi.passed)
            .with_note(format!("statistic {:.1}, critical {:.2}", chi.statistic, chi.critical)),
    );
    Ok(v)
}

#[derive(Serialize)]
struct RadialPoint {
    x: [f64; 2],
    exact: f64,
    ode: f64,
    hjb1: f64,
}

/// `n` points with `|x| ∈ [0.1, 0.9]` from a fixed stream.
pub fn radial_test_points(seed: u64, n: usize) -> Vec<Point> {
    let s = NoiseStream::new(seed, 0);
    (0..n as u64)
        .map(|k| {
            let r = 0.1 + 0.8 * s.uniform(2 * k);
            let a = 2.0 * std::f64::consts::PI * s.uniform(2 * k + 1);
            Point::new(&[r * a.cos(), r * a.sin()])
        })
        .collect()
}

fn example27(ctx: &Ctx) -> Result<Vec<Verdict>> {
    let sde = ctx.cfg.sde_config(ctx.cfg.epsilon());
    let ens = ctx
        .runner
        .run(&ctx.field, &ctx.domain, &sde, ctx.cfg.sde.n_paths, &Point::zeros(2))?;
    write_text(&ctx.file("ensemble.csv"), &io::ensemble_csv(&ens, 2))?;
    write_json(&ctx.file("summary.json"), &SummaryJson::from(&ens.summary))?;
    let records: Vec<_> = ens.exits().cloned().collect();
    let chi = angle_uniformity_test(&records, 12)?;
    write_json(&ctx.file("angle_chi_square.json"), &ChiSquareJson::from(&chi))?;
    let mut v = vec![
        Verdict::holds("angles.uniform", "chi-square over 12 angle bins passes at the 1% level", chi.passed)
            .with_note(format!("statistic {:.2}, critical {:.2}", chi.statistic, chi.critical)),
        Verdict::within("exit_time", "mean exit time", ens.summary.mean_exit, 1.0, "1", ctx.mc(0.05)).with_note(format!(
            "the exact expected exit time at eps = 0.02 is {RADIAL_EXPECTED_EXIT_EPS002:.5}, so the gap to 1 is a small-noise bias"
        )),
        Verdict::within(
            "exit_time.radial_generator",
            "mean exit time against the expected exit time of the radial diffusion",
            ens.summary.mean_exit,
            RADIAL_EXPECTED_EXIT_EPS002,
            &format!("{RADIAL_EXPECTED_EXIT_EPS002}"),
            ctx.mc(0.01),
        ),
        Verdict::at_most("exits.censored", "censored paths", ens.summary.censored_count as f64, 0.0),
    ];

    // Exit-time formula 1 - |x|^{1/2} from ODE paths and the grid.
    let grid = solve_hjb1(&ctx.field, &ctx.domain, &ctx.cfg.hjb1_options())?;
    ctx.write_grid("hjb1", &grid)?;
    let mut rows = vec![];
    let (mut ode_err, mut grid_err) = (0.0f64, 0.0f64);
    for x in radial_test_points(ctx.cfg.sde.master_seed, 20) {
        let exact = 1.0 - x.norm().sqrt();
        let path = integrate_ode(&ctx.field, &x, 2.0, ctx.cfg.ode.step)?;
        let ode = exit_functional(&path, &ctx.domain).map_or(f64::NAN, |e| e.time);
        let hjb1 = grid.interpolate(&x).unwrap_or(f64::NAN);
        ode_err = ode_err.max((ode - exact).abs());
        grid_err = grid_err.max((hjb1 - exact).abs());
        rows.push(RadialPoint {
            x: [x[0], x[1]],
            exact,
            ode,
            hjb1,
        });
    }
    write_json(&ctx.file("radial_points.json"), &rows)?;
    v.push(Verdict::at_most("formula.ode", "max |ODE exit time - (1 - |x|^(1/2))| at 20 points", ode_err, 1e-3));
    v.push(Verdict::at_most(
        "formula.hjb1",
        "max |grid value - (1 - |x|^(1/2))| at 20 points",
        grid_err,
        ctx.grid(1e-2),
    ));
    Ok(v)
}

/// Every output file under `dir`, relative paths sorted.
pub fn list_files(dir: &FsPath) -> Result<Vec<PathBuf>> {
    fn walk(root: &FsPath, dir: &FsPath, out: &mut Vec<PathBuf>) -> Result<()> {
        for e in std::fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                out.push(p.strip_prefix(root)?.to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = vec![];
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_configs_validate_and_round_trip() {
        for n in NAMES {
            let c = pinned(n).unwrap();
            assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        }
        assert!(pinned("example9").is_err());
    }

    #[test]
    fn product_exit_time_value() {
        assert!((product_exit_time(0.25) - 0.42044820762685725).abs() < 1e-15);
    }

    #[test]
    fn radial_points_lie_in_the_annulus() {
        let pts = radial_test_points(27, 20);
        assert_eq!(pts.len(), 20);
        assert!(pts.iter().all(|p| (0.1..=0.9).contains(&p.norm())));
    }
}
