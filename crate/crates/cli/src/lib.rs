//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] from an optional `--config` file
//! plus flag overrides, runs, and writes its artifacts into `--out`. The
//! effective config is echoed as `config.toml` and inside `report.json`;
//! passing the echo back with `--config` reproduces the run.
//!
//! Exit status: 0 when every check passes, 2 when a check fails (the report is
//! still written), 1 on usage, config or solver errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use facetflow::config::{InitialConfig, InitialKind, TimeLawKind};
use facetflow::experiments::{
    alpha_sweep, run_breaking, run_creation, run_stagnation_steady, run_stagnation_zero, sampled_sine_terms, Check,
    ExperimentReport, ExperimentSettings, SweepReport,
};
use facetflow::facets::{detect_facets, detect_facets_default};
use facetflow::io::{diagnostics_csv, format_profile, read_profile, snapshot_file_name};
use facetflow::{
    evolve, solve_constant_force, solve_steady_numeric, solve_three_facet, three_facet_compatibility,
    three_facet_endpoints, verify_steady_profile, verify_steady_solution, EvolveConfig, ForceField, ForceTerm,
    OperatorKind, Profile, RunConfig,
};

#[derive(Debug, Parser)]
#[command(name = "facetflow", version, about = "Facet dynamics for u_t - (L(u_x))_x = f on (0, 1)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady state: three-facet closed form (--alpha), constant force
    /// (--constant) or the force of a config file.
    Steady(SteadyArgs),
    /// Time evolution described by a config file.
    Evolve(Common),
    /// Facet detection on a profile file.
    Analyze(AnalyzeArgs),
    /// Scripted scenarios with pass/fail checks.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (required; created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_cells: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Per-step solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct SteadyArgs {
    #[command(flatten)]
    common: Common,
    /// Three-facet steady state of the ramp family frozen at `alpha > 12`.
    #[arg(long, conflicts_with = "constant")]
    alpha: Option<f64>,
    /// Constant force `F ≡ A` on [0, 1].
    #[arg(long)]
    constant: Option<f64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Two-column profile file.
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Slope threshold; defaults to `h`.
    #[arg(long)]
    slope_tol: Option<f64>,
    /// Shortest facet; defaults to `4h`.
    #[arg(long)]
    min_length: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum ExperimentCmd {
    /// Evolution from zero under a force that fits (or not) into the band.
    StagnationZero(ExperimentArgs),
    /// Evolution from the steady state of F ≡ 4 under a ramped perturbation.
    StagnationSteady(ExperimentArgs),
    /// Facet creation at extrema of the initial profile.
    Creation(ExperimentArgs),
    /// Facet breaking under the ramp family with cap alpha.
    Breaking(ExperimentArgs),
    /// Breaking classification over several alphas plus threshold bisection.
    Sweep(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Ramp cap for `stagnation-steady`.
    #[arg(long)]
    cap: Option<f64>,
    /// Time after the ramp stops (`T = alpha + settle`).
    #[arg(long)]
    settle: Option<f64>,
    /// Allowed offset of the threshold estimate from 12.
    #[arg(long)]
    delta: Option<f64>,
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Steady(a) => steady(a),
        Command::Evolve(c) => evolve_cmd(c),
        Command::Analyze(a) => analyze(a),
        Command::Experiment(e) => experiment(e),
    }
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = common.n_cells {
        cfg.grid.n_cells = n;
    }
    if let Some(t) = common.tau {
        cfg.time.tau = t;
    }
    if let Some(t) = common.t_final {
        cfg.time.t_final = Some(t);
    }
    if let Some(t) = common.tol {
        cfg.solver.tol = Some(t);
    }
    Ok(cfg)
}

fn settings(cfg: &RunConfig) -> anyhow::Result<ExperimentSettings> {
    let mut s = ExperimentSettings::new(cfg.grid.n_cells, cfg.tau()?)?;
    s.op = cfg.operator()?;
    s.sampling = cfg.force.sampling;
    s.tol = cfg.solver.tol;
    if let Some(dt) = cfg.time.snapshot_every {
        if !(dt > 0.0) {
            bail!("time.snapshot_every must be > 0, got {dt}");
        }
        s.snapshot_every = dt;
    }
    s.snapshots = cfg.time.snapshots.clone();
    Ok(s)
}

fn has_force_terms(cfg: &RunConfig) -> bool {
    !cfg.force.base.is_empty() || !cfg.force.ramp.is_empty()
}

fn steady(a: SteadyArgs) -> anyhow::Result<bool> {
    let mut cfg = load(&a.common)?;
    if let Some(alpha) = a.alpha {
        cfg.experiment.alpha = Some(alpha);
    }
    if let Some(c) = a.constant {
        cfg.force.base = vec![ForceTerm::new(0.0, 1.0, c)];
        cfg.force.ramp.clear();
        cfg.force.time_law = TimeLawKind::Constant;
        cfg.force.cap = None;
        cfg.force.sign = 1.0;
    }
    if a.common.config.is_none() && a.alpha.is_none() && a.constant.is_none() {
        bail!("steady needs one of --alpha, --constant or --config");
    }
    let start = Instant::now();
    let report = match cfg.experiment.alpha {
        Some(alpha) => {
            if has_force_terms(&cfg) {
                bail!("steady: experiment.alpha selects the built-in ramp family; remove the [force] terms");
            }
            steady_three_facet(&cfg, alpha)?
        }
        None => steady_force(&cfg)?,
    };
    finish(&report, &cfg, "steady", &a.common.out, start)
}

fn steady_three_facet(cfg: &RunConfig, alpha: f64) -> anyhow::Result<Output> {
    let op = cfg.operator()?;
    let grid = cfg.grid()?;
    let h = grid.h();
    let sol = solve_three_facet(&op, alpha)?;
    let (c, e) = three_facet_endpoints(alpha)?;
    let frozen = ForceField::alpha_slice(alpha);
    let mut r = ExperimentReport::new("steady-three-facet");
    r.param("alpha", json!(alpha));
    r.param("n_cells", json!(grid.n_cells()));
    r.param("c", json!(c));
    r.param("e", json!(e));
    r.param("facets", json!(sol.facets));

    let compat = three_facet_compatibility(alpha)?;
    r.checks.push(Check::at_most("compatibility_residual", compat.abs(), 1e-12));
    let cont = verify_steady_solution(&sol, &op, &frozen, 4096, 1e-9);
    r.checks.push(Check::at_most("closed_form_inclusion", cont.violation, 1e-9));

    let exact = sol.sample(&grid);
    let numeric = solve_steady_numeric(&op, &frozen, &grid, cfg.force.sampling, 1e-9)?;
    r.checks.push(Check::at_most(
        "numeric_vs_closed_form_sup",
        numeric.profile.sup_distance(&exact),
        2.0 * h,
    ));
    let found = detect_facets_default(&numeric.profile);
    r.checks.push(Check::equals("numeric_facet_count", found.n_extremal() as f64, 3.0));
    r.param("numeric_facets", json!(found.facets));
    Ok(Output {
        report: r,
        profiles: vec![("steady.txt", exact), ("steady_numeric.txt", numeric.profile)],
    })
}

fn steady_force(cfg: &RunConfig) -> anyhow::Result<Output> {
    if !has_force_terms(cfg) {
        bail!("steady: the config has no [force] terms");
    }
    let op = cfg.operator()?;
    let grid = cfg.grid()?;
    let h = grid.h();
    let t = cfg.time.t_final.unwrap_or(0.0);
    let force = cfg.force()?.slice(t);
    let mut r = ExperimentReport::new("steady");
    r.param("n_cells", json!(grid.n_cells()));
    r.param("force_time", json!(t));

    let numeric = solve_steady_numeric(&op, &force, &grid, cfg.force.sampling, 1e-9)?;
    let check = verify_steady_profile(&numeric.profile, &op, &force, cfg.force.sampling, 1e-8);
    r.checks.push(Check::at_most("numeric_inclusion", check.violation, 1e-8));
    let found = detect_facets_default(&numeric.profile);
    r.param("facets", json!(found.facets));
    let mut profiles = vec![("steady_numeric.txt", numeric.profile.clone())];

    // a constant force over [0, 1] has a closed form
    if let ([v], [_]) = (force.values(), &force.breaks()[1..]) {
        if op.kind() == OperatorKind::TvPlusLinear {
            let sol = solve_constant_force(&op, *v)?;
            let exact = sol.sample(&grid);
            r.param("closed_form_facets", json!(sol.facets));
            r.checks.push(Check::at_most(
                "numeric_vs_closed_form_sup",
                numeric.profile.sup_distance(&exact),
                2.0 * h,
            ));
            profiles.insert(0, ("steady.txt", exact));
        }
    }
    Ok(Output { report: r, profiles })
}

fn evolve_cmd(c: Common) -> anyhow::Result<bool> {
    if c.config.is_none() {
        bail!("evolve needs --config\n\nUsage: facetflow evolve --config <CONFIG> --out <OUT>");
    }
    let cfg = load(&c)?;
    let start = Instant::now();
    let grid = cfg.grid()?;
    let force = cfg.force()?;
    let u0 = cfg.initial_profile(&grid)?;
    let t_final = cfg.t_final()?;
    let mut ec = EvolveConfig::new(cfg.operator()?, cfg.tau()?, t_final);
    ec.tol = cfg.solver.tol;
    ec.sampling = cfg.force.sampling;
    ec.snapshot_times = cfg.snapshot_times(t_final);
    ec.snapshot_times.push(t_final);
    let traj = evolve(&u0, &force, &ec)?;

    let mut r = ExperimentReport::new("evolve");
    r.param("n_cells", json!(grid.n_cells()));
    r.param("tau", json!(ec.tau));
    r.param("t_final", json!(t_final));
    r.param("max_ut_sup", json!(traj.max_ut_sup()));
    r.param("final_facets", json!(detect_facets_default(&traj.final_profile).facets));
    r.checks.push(Check::equals(
        "creation_bound_failures",
        traj.creation_failures.len() as f64,
        0.0,
    ));
    r.checks.push(Check::flag(
        "slope_variation_monitor",
        facetflow::evolve::tv_monitor(&traj).is_none(),
    ));
    r.attach(traj);
    finish(
        &Output {
            report: r,
            profiles: Vec::new(),
        },
        &cfg,
        "evolve",
        &c.out,
        start,
    )
}

fn analyze(a: AnalyzeArgs) -> anyhow::Result<bool> {
    let start = Instant::now();
    let u = read_profile(&a.profile)?;
    let h = u.grid().h();
    let slope_tol = a.slope_tol.unwrap_or(h);
    let min_length = a.min_length.unwrap_or(4.0 * h);
    let set = detect_facets(&u, slope_tol, min_length)?;
    let mut r = ExperimentReport::new("analyze");
    r.param("n_cells", json!(u.n_cells()));
    r.param("slope_tol", json!(slope_tol));
    r.param("min_length", json!(min_length));
    r.param("n_extremal", json!(set.n_extremal()));
    r.param("facets", json!(set.facets));
    for f in &set.facets {
        println!(
            "FACET {} [{:.6}, {:.6}] level={:e}",
            serde_json::to_value(f.kind)?.as_str().unwrap_or("?"),
            f.left,
            f.right,
            f.level
        );
    }
    let out = Output {
        report: r,
        profiles: Vec::new(),
    };
    let echo = json!({ "profile": a.profile, "slope_tol": slope_tol, "min_length": min_length });
    write_outputs(&out, Echo::Json(echo), "analyze", &a.out)?;
    print_summary(&out.report, &a.out, start);
    Ok(out.report.passed())
}

fn experiment(e: ExperimentCmd) -> anyhow::Result<bool> {
    let (name, a) = match e {
        ExperimentCmd::StagnationZero(a) => ("stagnation-zero", a),
        ExperimentCmd::StagnationSteady(a) => ("stagnation-steady", a),
        ExperimentCmd::Creation(a) => ("creation", a),
        ExperimentCmd::Breaking(a) => ("breaking", a),
        ExperimentCmd::Sweep(a) => ("sweep", a),
    };
    let mut cfg = load(&a.common)?;
    if let Some(v) = a.alpha {
        cfg.experiment.alpha = Some(v);
    }
    if !a.alphas.is_empty() {
        cfg.experiment.alphas = a.alphas.clone();
    }
    if let Some(v) = a.cap {
        cfg.force.cap = Some(v);
    }
    if let Some(v) = a.settle {
        cfg.experiment.settle = Some(v);
    }
    if let Some(v) = a.delta {
        cfg.experiment.delta = Some(v);
    }
    let command = format!("experiment {name}");
    let start = Instant::now();
    match name {
        "stagnation-zero" => {
            if !has_force_terms(&cfg) {
                // ramped sine whose primitive stays inside the band
                let sine = sampled_sine_terms(3.0, 64);
                cfg.force.base = sine.clone();
                cfg.force.ramp = sine;
                cfg.force.time_law = TimeLawKind::ClippedRamp;
                cfg.force.cap = Some(1.0);
            }
            let t = *cfg.time.t_final.get_or_insert(2.0);
            let r = run_stagnation_zero(&cfg.force()?, t, &settings(&cfg)?)?;
            finish(&Output::of(r), &cfg, &command, &a.common.out, start)
        }
        "stagnation-steady" => {
            let base = [ForceTerm::new(0.0, 1.0, 4.0)];
            if !cfg.force.base.is_empty() && cfg.force.base != base {
                bail!("stagnation-steady: force.base is fixed to [{{ start = 0, end = 1, amplitude = 4 }}]");
            }
            if cfg.force.sign != 1.0 {
                bail!("stagnation-steady: force.sign must be 1 (the perturbation is given in the steady convention)");
            }
            cfg.force.base = base.to_vec();
            if cfg.force.ramp.is_empty() {
                cfg.force.ramp = ForceField::breaking_pattern();
            }
            cfg.force.time_law = TimeLawKind::ClippedRamp;
            let cap = *cfg.force.cap.get_or_insert(10.0);
            let t = *cfg.time.t_final.get_or_insert(20.0);
            let r = run_stagnation_steady(&cfg.force.ramp, cap, t, &settings(&cfg)?)?;
            finish(&Output::of(r), &cfg, &command, &a.common.out, start)
        }
        "creation" => {
            if cfg.initial == InitialConfig::default() {
                cfg.initial = InitialConfig {
                    kind: InitialKind::Tent,
                    peak: Some(0.5),
                    height: Some(0.5),
                    ..InitialConfig::default()
                };
            }
            let t = *cfg.time.t_final.get_or_insert(0.1);
            if cfg.time.snapshot_every.is_none() && cfg.time.snapshots.is_empty() {
                cfg.time.snapshot_every = Some(0.01);
            }
            let s = settings(&cfg)?;
            let u0 = cfg.initial_profile(&s.grid)?;
            let r = run_creation(&cfg.force()?, &u0, t, &s)?;
            finish(&Output::of(r), &cfg, &command, &a.common.out, start)
        }
        "breaking" => {
            if has_force_terms(&cfg) {
                bail!("breaking uses the built-in ramp family; remove the [force] terms");
            }
            let alpha = cfg
                .experiment
                .alpha
                .ok_or_else(|| anyhow!("breaking needs --alpha or experiment.alpha"))?;
            let t = *cfg.time.t_final.get_or_insert(alpha + 20.0);
            let r = run_breaking(alpha, t, &settings(&cfg)?)?;
            finish(&Output::of(r), &cfg, &command, &a.common.out, start)
        }
        _ => {
            if has_force_terms(&cfg) {
                bail!("sweep uses the built-in ramp family; remove the [force] terms");
            }
            if cfg.experiment.alphas.is_empty() {
                cfg.experiment.alphas = vec![8.0, 10.0, 11.0, 13.0, 16.0, 24.0];
            }
            let settle = *cfg.experiment.settle.get_or_insert(20.0);
            let delta = *cfg.experiment.delta.get_or_insert(0.5);
            let sweep = alpha_sweep(&cfg.experiment.alphas, settle, &settings(&cfg)?, delta)?;
            finish_sweep(&sweep, &cfg, &command, &a.common.out, start)
        }
    }
}

/// A report plus named profiles to write next to it.
struct Output {
    report: ExperimentReport,
    profiles: Vec<(&'static str, Profile)>,
}

impl Output {
    fn of(report: ExperimentReport) -> Self {
        Self {
            report,
            profiles: Vec::new(),
        }
    }
}

enum Echo<'a> {
    Config(&'a RunConfig),
    Json(serde_json::Value),
}

#[derive(Serialize)]
struct ReportFile<'a> {
    command: &'a str,
    passed: bool,
    config: serde_json::Value,
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

fn finish(out: &Output, cfg: &RunConfig, command: &str, dir: &Path, start: Instant) -> anyhow::Result<bool> {
    write_outputs(out, Echo::Config(cfg), command, dir)?;
    print_summary(&out.report, dir, start);
    Ok(out.report.passed())
}

fn print_summary(r: &ExperimentReport, dir: &Path, start: Instant) {
    for c in &r.checks {
        println!("{}", c.summary_line());
    }
    let passed = r.checks.iter().filter(|c| c.pass).count();
    println!(
        "{}: {passed}/{} checks passed in {:.2}s, artifacts in {}",
        r.scenario,
        r.checks.len(),
        start.elapsed().as_secs_f64(),
        dir.display()
    );
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Removes snapshot files left over from an earlier run in `dir`.
fn clear_snapshots(dir: &Path) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("snapshot_") && name.ends_with(".txt") {
            fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
        }
    }
    Ok(())
}

/// Writes `report.json`, the config echo, profiles and, for trajectories,
/// `diagnostics.csv`, `final.txt` and one file per snapshot.
pub fn emit_report(
    report: &ExperimentReport,
    config: &RunConfig,
    command: &str,
    dir: &Path,
) -> anyhow::Result<()> {
    let out = Output {
        report: report.clone(),
        profiles: Vec::new(),
    };
    write_outputs(&out, Echo::Config(config), command, dir)
}

fn write_outputs(out: &Output, echo: Echo, command: &str, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    clear_snapshots(dir)?;
    let config = match echo {
        Echo::Config(cfg) => {
            write_file(&dir.join("config.toml"), cfg.to_toml_string())?;
            serde_json::to_value(cfg)?
        }
        Echo::Json(v) => v,
    };
    let file = ReportFile {
        command,
        passed: out.report.passed(),
        config,
        report: &out.report,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_file(&dir.join("report.json"), text)?;
    for (name, p) in &out.profiles {
        write_file(&dir.join(name), format_profile(p))?;
    }
    if let Some(t) = &out.report.trajectory {
        write_file(&dir.join("diagnostics.csv"), diagnostics_csv(t))?;
        write_file(&dir.join("final.txt"), format_profile(&t.final_profile))?;
        for (k, s) in t.snapshots.iter().enumerate() {
            write_file(&dir.join(snapshot_file_name(k, s.time)), format_profile(&s.profile))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepFile<'a> {
    command: &'a str,
    passed: bool,
    config: &'a RunConfig,
    outcomes: &'a [(f64, bool)],
    bracket: Option<(f64, f64)>,
    threshold: Option<f64>,
    threshold_note: &'a str,
    checks: &'a [Check],
}

fn finish_sweep(
    sweep: &SweepReport,
    cfg: &RunConfig,
    command: &str,
    dir: &Path,
    start: Instant,
) -> anyhow::Result<bool> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(&dir.join("config.toml"), cfg.to_toml_string())?;
    let file = SweepFile {
        command,
        passed: sweep.passed(),
        config: cfg,
        outcomes: &sweep.outcomes,
        bracket: sweep.bracket,
        threshold: sweep.threshold,
        threshold_note: &sweep.threshold_note,
        checks: &sweep.checks,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_file(&dir.join("report.json"), text)?;

    let settle = cfg.experiment.settle.unwrap_or(20.0);
    for run in &sweep.runs {
        let alpha = run.parameters.get("alpha").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        let mut sub = cfg.clone();
        sub.experiment.alphas.clear();
        sub.experiment.settle = None;
        sub.experiment.delta = None;
        sub.experiment.alpha = Some(alpha);
        sub.time.t_final = Some(alpha + settle);
        let out = Output::of(run.clone());
        write_outputs(&out, Echo::Config(&sub), "experiment breaking", &dir.join(format!("alpha_{alpha}")))?;
        println!(
            "run alpha={alpha} broke={} checks {}/{}",
            facetflow::experiments::broke(run),
            run.checks.iter().filter(|c| c.pass).count(),
            run.checks.len()
        );
    }
    for (a, b) in &sweep.outcomes[sweep.runs.len()..] {
        println!("bisection alpha={a} broke={b}");
    }
    for c in &sweep.checks {
        println!("{}", c.summary_line());
    }
    println!(
        "sweep: threshold {} ({}/{} checks passed) in {:.2}s, artifacts in {}",
        sweep.threshold_note,
        sweep.checks.iter().filter(|c| c.pass).count(),
        sweep.checks.len(),
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(sweep.passed())
}
