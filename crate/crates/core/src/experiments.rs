//! End-to-end scenarios: stagnation of zero and of steady states, creation
//! of facets at extrema, and breaking of a facet under a ramped force.
//!
//! Forces are handed to [`evolve`] in the evolution convention
//! `u_t - (L(u_x))_x = f`. Steady states and the facet checks use
//! `(L(u_x))_x = F`, so a steady state of `F` is stationary for `f = -F`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::evolve::{check_ut_bound_default, evolve, tv_monitor, EvolveConfig, TrajectoryReport};
use crate::facets::{band_check, facet_flux_balance, stagnation_conditions_check, FacetKind, FacetSet};
use crate::model::{ForceField, ForceTerm, Grid, OperatorSpec, PiecewiseConstant, Profile, Sampling, TimeLaw};
use crate::steady::{solve_constant_force, solve_steady_numeric, solve_three_facet, three_facet_endpoints};

/// One named assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            expected: format!("<= {limit:e}"),
            observed,
            tolerance: limit,
            pass: observed <= limit,
        }
    }

    pub fn greater(name: &str, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            expected: format!("> {limit:e}"),
            observed,
            tolerance: limit,
            pass: observed > limit,
        }
    }

    pub fn equals(name: &str, observed: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            expected: format!("== {expected}"),
            observed,
            tolerance: 0.0,
            pass: observed == expected,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            expected: "true".into(),
            observed: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }

    /// `PASS name observed=... expected ...`
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} observed={:e} expected {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.expected
        )
    }
}

/// Compact view of a trajectory for the report file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub n_steps: usize,
    pub final_time: f64,
    pub max_ut_sup: f64,
    pub final_n_facets: usize,
    pub creation_checked: usize,
    pub creation_min_margin: Option<f64>,
    pub final_l2_to_target: Option<f64>,
    pub snapshot_facets: Vec<(f64, FacetSet)>,
}

impl TrajectorySummary {
    fn of(t: &TrajectoryReport) -> Self {
        Self {
            n_steps: t.n_steps(),
            final_time: t.times.last().copied().unwrap_or(0.0),
            max_ut_sup: t.max_ut_sup(),
            final_n_facets: t.n_facets.last().copied().unwrap_or(0),
            creation_checked: t.creation_checked,
            creation_min_margin: t.creation_min_margin,
            final_l2_to_target: t.l2_to_target.as_ref().and_then(|v| v.last().copied()),
            snapshot_facets: t.snapshots.iter().map(|s| (s.time, s.facets.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub summary: Option<TrajectorySummary>,
    #[serde(skip)]
    pub trajectory: Option<TrajectoryReport>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentReport {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.into(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            summary: None,
            trajectory: None,
            wall_clock: Duration::ZERO,
        }
    }

    pub fn param(&mut self, key: &str, v: Value) {
        self.parameters.insert(key.into(), v);
    }

    /// Stores the trajectory and its summary.
    pub fn attach(&mut self, t: TrajectoryReport) {
        self.summary = Some(TrajectorySummary::of(&t));
        self.trajectory = Some(t);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Discretization shared by all scenarios.
#[derive(Debug, Clone)]
pub struct ExperimentSettings {
    pub op: OperatorSpec,
    pub grid: Grid,
    pub tau: f64,
    pub sampling: Sampling,
    pub tol: Option<f64>,
    /// Spacing of stored snapshots.
    pub snapshot_every: f64,
    /// Explicit snapshot times; replaces `snapshot_every` when non-empty.
    pub snapshots: Vec<f64>,
}

impl ExperimentSettings {
    pub fn new(n_cells: usize, tau: f64) -> Result<Self> {
        Ok(Self {
            op: OperatorSpec::tv_plus_linear(),
            grid: Grid::new(n_cells)?,
            tau,
            sampling: Sampling::default(),
            tol: None,
            snapshot_every: 1.0,
            snapshots: Vec::new(),
        })
    }

    fn evolve_config(&self, t_final: f64) -> EvolveConfig {
        let mut cfg = EvolveConfig::new(self.op.clone(), self.tau, t_final);
        cfg.tol = self.tol;
        cfg.sampling = self.sampling;
        if !self.snapshots.is_empty() {
            cfg.snapshot_times = self.snapshots.clone();
            return cfg;
        }
        let count = (t_final / self.snapshot_every + 1e-9).floor() as usize;
        cfg.snapshot_times = (1..=count).map(|k| k as f64 * self.snapshot_every).collect();
        if cfg.snapshot_times.last().is_none_or(|&t| t < t_final - 0.5 * self.tau) {
            cfg.snapshot_times.push(t_final);
        }
        cfg
    }

    fn record(&self, r: &mut ExperimentReport) {
        r.param("n_cells", json!(self.grid.n_cells()));
        r.param("tau", json!(self.tau));
        r.param("sampling", json!(self.sampling));
    }
}

/// Allowed drift of a stagnating state: `1e-6 ||u0||_∞`, or `1e-8` for `u0 ≡ 0`.
pub fn stagnation_tolerance(u0: &Profile) -> f64 {
    let s = u0.sup_norm();
    if s > 0.0 {
        1e-6 * s
    } else {
        1e-8
    }
}

/// `amplitude * sin(2πx)` replaced by its averages over `pieces` equal cells.
pub fn sampled_sine_terms(amplitude: f64, pieces: usize) -> Vec<ForceTerm> {
    let w = 1.0 / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (a, b) = (k as f64 * w, (k + 1) as f64 * w);
            let avg = ((2.0 * std::f64::consts::PI * a).cos() - (2.0 * std::f64::consts::PI * b).cos())
                / (2.0 * std::f64::consts::PI * w);
            ForceTerm::new(a, b, amplitude * avg)
        })
        .collect()
}

/// Largest primitive range width of `force` over `[0, T]`. The width is
/// convex in the time weight, so the time breakpoints suffice.
fn max_band_width(force: &ForceField, t_final: f64) -> f64 {
    force
        .time_breakpoints(t_final)
        .into_iter()
        .map(|t| band_check(&force.slice(t)).0)
        .fold(0.0, f64::max)
}

/// Evolution from `u ≡ 0`. When the primitive of `f` fits into a band of width
/// 2 at all times the state must stay at zero; otherwise motion is expected.
pub fn run_stagnation_zero(force: &ForceField, t_final: f64, s: &ExperimentSettings) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut r = ExperimentReport::new("stagnation-zero");
    s.record(&mut r);
    r.param("t_final", json!(t_final));
    let width = max_band_width(force, t_final);
    let band_ok = width <= 2.0;
    r.param("band_width", json!(width));
    r.param("mode", json!(if band_ok { "EXPECT_REST" } else { "EXPECT_MOTION" }));

    let u0 = Profile::zeros(&s.grid);
    let traj = evolve(&u0, force, &s.evolve_config(t_final))?;
    let max_dev = traj.sup_dev_initial.iter().fold(0.0_f64, |m, v| m.max(*v));
    if band_ok {
        r.checks.push(Check::at_most("zero_state_at_rest", max_dev, stagnation_tolerance(&u0)));
    } else {
        r.checks
            .push(Check::greater("motion_detected", traj.final_profile.sup_norm(), 1e-2));
    }
    r.checks.push(creation_check(&traj));
    r.attach(traj);
    r.wall_clock = start.elapsed();
    Ok(r)
}

fn creation_check(t: &TrajectoryReport) -> Check {
    Check::equals("creation_bound_failures", t.creation_failures.len() as f64, 0.0)
}

/// Numeric steady state of `(L(u_x))_x = F` on the experiment grid.
fn steady_state(s: &ExperimentSettings, force: &PiecewiseConstant) -> Result<Profile> {
    Ok(solve_steady_numeric(&s.op, force, &s.grid, s.sampling, 1e-9)?.profile)
}

/// Starts from the steady state of `F ≡ 4` (facet `[1/4, 3/4]`) and adds
/// `min{t, cap} * Σ perturbation`. Rest is expected iff the facet conditions
/// hold at all times.
pub fn run_stagnation_steady(
    perturbation: &[ForceTerm],
    cap: f64,
    t_final: f64,
    s: &ExperimentSettings,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut r = ExperimentReport::new("stagnation-steady");
    s.record(&mut r);
    r.param("t_final", json!(t_final));
    r.param("cap", json!(cap));
    r.param("perturbation", json!(perturbation));

    let steady_force = ForceField::new(
        vec![ForceTerm::new(0.0, 1.0, 4.0)],
        perturbation.to_vec(),
        TimeLaw::ClippedRamp { cap },
        1.0,
    )?;
    let u0 = steady_state(s, &steady_force.slice(0.0))?;
    let mut times: Vec<f64> = (0..=t_final.floor() as usize).map(|k| k as f64).collect();
    times.extend(steady_force.time_breakpoints(t_final));
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let conditions = stagnation_conditions_check(&steady_force, 0.25, 0.75, &times)?;
    let conditions_ok = conditions.iter().all(|c| c.all());
    r.param("conditions_hold", json!(conditions_ok));

    let traj = evolve(&u0, &steady_force.negated(), &s.evolve_config(t_final))?;
    let max_dev = traj.sup_dev_initial.iter().fold(0.0_f64, |m, v| m.max(*v));
    let eps = stagnation_tolerance(&u0);
    if conditions_ok {
        r.checks.push(Check::at_most("steady_state_at_rest", max_dev, eps));
    } else {
        r.checks.push(Check::greater("motion_detected", max_dev, eps));
    }
    r.checks.push(creation_check(&traj));
    r.attach(traj);
    r.wall_clock = start.elapsed();
    Ok(r)
}

/// Evolution from an initial profile with strict extrema; every extremum at
/// `t >= 10τ` must sit on a facet satisfying the length bound.
pub fn run_creation(
    force: &ForceField,
    u0: &Profile,
    t_final: f64,
    s: &ExperimentSettings,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut r = ExperimentReport::new("creation");
    s.record(&mut r);
    r.param("t_final", json!(t_final));
    let traj = evolve(u0, force, &s.evolve_config(t_final))?;
    r.checks.push(creation_check(&traj));
    r.param("extrema_checked", json!(traj.creation_checked));
    // longest extremal facet per snapshot
    let lengths: Vec<f64> = traj
        .snapshots
        .iter()
        .filter_map(|sn| {
            sn.facets
                .facets
                .iter()
                .filter(|f| f.kind.is_extremum())
                .map(|f| f.length())
                .reduce(f64::max)
        })
        .collect();
    r.param("extremal_facet_lengths", json!(lengths));
    r.attach(traj);
    r.wall_clock = start.elapsed();
    Ok(r)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Required decay rate of `ln ||u - u_α||²` once the force is frozen.
pub const DECAY_RATE: f64 = 9.0;

/// Facet-breaking run: the state starts at the steady state of `F ≡ 4` and is
/// driven by `-(4 + min{t, α}(-2χ_[3/8,5/8] + χ_[1/4,3/4]))`.
pub fn run_breaking(alpha: f64, t_final: f64, s: &ExperimentSettings) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut r = ExperimentReport::new("breaking");
    s.record(&mut r);
    r.param("alpha", json!(alpha));
    r.param("t_final", json!(t_final));
    let h = s.grid.h();
    let tau = s.tau;

    let force = ForceField::breaking_family(alpha, -1.0)?;
    let frozen = ForceField::alpha_slice(alpha);
    let u0 = steady_state(s, &PiecewiseConstant::constant(4.0))?;
    let target = steady_state(s, &frozen)?;
    let mut cfg = s.evolve_config(t_final);
    cfg.target = Some(target.clone());
    let traj = evolve(&u0, &force, &cfg)?;
    let breaks = alpha > 12.0;
    r.param("breaking_expected", json!(breaks));

    // stagnation up to the threshold
    let eps = stagnation_tolerance(&u0);
    let t_stag = 12.0 - 5.0 * tau;
    let stag_dev = traj
        .times
        .iter()
        .zip(&traj.sup_dev_initial)
        .filter(|(t, _)| **t <= t_stag)
        .fold(0.0_f64, |m, (_, v)| m.max(*v));
    r.checks.push(Check::at_most("stagnation_before_threshold", stag_dev, eps));

    let max_count = traj.n_facets.iter().copied().max().unwrap_or(0);
    let first_count = traj.n_facets.first().copied().unwrap_or(0);
    let final_count = traj.n_facets.last().copied().unwrap_or(0);
    r.param("max_facet_count", json!(max_count));
    r.param(
        "first_three_facet_time",
        json!(traj.n_facets.iter().position(|&c| c >= 3).map(|k| traj.times[k])),
    );
    r.checks.push(Check::equals("initial_facet_count", first_count as f64, 1.0));

    let l2 = traj.l2_to_target.clone().unwrap_or_default();
    let final_l2 = l2.last().copied().unwrap_or(f64::NAN);
    r.checks.push(Check::at_most("final_l2_to_steady", final_l2, 1e-6));

    if breaks {
        r.checks.push(Check::equals("final_facet_count", final_count as f64, 3.0));
        let exact = solve_three_facet(&OperatorSpec::tv_plus_linear(), alpha)?.sample(&s.grid);
        r.checks.push(Check::at_most(
            "final_vs_closed_form_sup",
            traj.final_profile.sup_distance(&exact),
            2.0 * h,
        ));
        let (c, e) = three_facet_endpoints(alpha)?;
        let expected = [(0.25, c, FacetKind::Min), (e, 1.0 - e, FacetKind::Max), (1.0 - c, 0.75, FacetKind::Min)];
        let found: Vec<_> = crate::facets::detect_facets_default(&traj.final_profile)
            .facets
            .into_iter()
            .filter(|f| f.kind.is_extremum())
            .collect();
        let mut endpoint_err = if found.len() == 3 { 0.0_f64 } else { f64::INFINITY };
        let mut balance_err = endpoint_err;
        let f_inf = frozen.sup_abs();
        if found.len() == 3 {
            for (f, (a, b, kind)) in found.iter().zip(expected) {
                if f.kind != kind {
                    endpoint_err = f64::INFINITY;
                }
                endpoint_err = endpoint_err.max((f.left - a).abs()).max((f.right - b).abs());
                let jump = if kind == FacetKind::Min { 2.0 } else { -2.0 };
                balance_err = balance_err.max(facet_flux_balance(f.left, f.right, &frozen, jump));
            }
        }
        r.param(
            "final_facets",
            json!(found.iter().map(|f| (f.left, f.right, f.level)).collect::<Vec<_>>()),
        );
        r.param("min_facet_length", json!(found.iter().map(|f| f.length()).fold(f64::INFINITY, f64::min)));
        r.param(
            "resolution_adequate",
            json!(found.iter().all(|f| f.length() >= 8.0 * h) && (e - c) >= 8.0 * h),
        );
        r.checks.push(Check::at_most("final_facet_endpoints", endpoint_err, 2.0 * h));
        r.checks
            .push(Check::at_most("facet_flux_balance", balance_err, 4.0 * h * f_inf));

        // decay once the force is frozen
        let mut increase = 0.0_f64;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 1..traj.times.len() {
            let t = traj.times[k];
            if t > alpha {
                increase = increase.max(l2[k] * l2[k] - l2[k - 1] * l2[k - 1]);
            }
            if t >= alpha + 1.0 - 0.5 * tau && t <= alpha + 5.0 + 0.5 * tau {
                xs.push(t);
                ys.push((l2[k] * l2[k]).ln());
            }
        }
        r.checks.push(Check::at_most("decay_nonincreasing", increase, 0.0));
        let slope = if xs.len() >= 2 { fitted_slope(&xs, &ys) } else { f64::NAN };
        r.checks.push(Check::at_most("decay_log_slope", slope, -DECAY_RATE));
    } else {
        r.checks.push(Check::at_most("facet_count_never_above_one", max_count as f64, 1.0));
    }

    let ut = check_ut_bound_default(&traj, force.time_derivative_integral(t_final), 0.0);
    r.param("ut_bound", json!(ut));
    r.checks.push(Check::at_most("ut_sup_bound", ut.max_ut_sup, ut.bound));
    r.checks.push(creation_check(&traj));
    r.checks.push(Check::flag("slope_variation_monitor", tv_monitor(&traj).is_none()));
    r.attach(traj);
    r.wall_clock = start.elapsed();
    Ok(r)
}

/// Whether a breaking run ever showed three extremal facets.
pub fn broke(r: &ExperimentReport) -> bool {
    r.parameters
        .get("max_facet_count")
        .and_then(Value::as_u64)
        .is_some_and(|c| c >= 3)
}

/// Outcome of a sweep over `α`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub runs: Vec<ExperimentReport>,
    /// `(α, broke)` for every run, sweep and bisection alike.
    pub outcomes: Vec<(f64, bool)>,
    pub bracket: Option<(f64, f64)>,
    /// Midpoint of the final bracket.
    pub threshold: Option<f64>,
    /// Textual threshold statement when no bracket exists.
    pub threshold_note: String,
    pub checks: Vec<Check>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Width at which the threshold bisection stops.
pub const BISECTION_WIDTH: f64 = 0.25;

/// Runs [`run_breaking`] for every `α` (in parallel), then bisects between the
/// largest non-breaking and smallest breaking value. The estimate must lie
/// within `delta` of 12.
pub fn alpha_sweep(alphas: &[f64], settle: f64, s: &ExperimentSettings, delta: f64) -> Result<SweepReport> {
    let runs: Vec<ExperimentReport> = alphas
        .par_iter()
        .map(|&a| run_breaking(a, a + settle, s))
        .collect::<Result<_>>()?;
    let mut outcomes: Vec<(f64, bool)> = alphas.iter().copied().zip(runs.iter().map(broke)).collect();
    let mut checks: Vec<Check> = outcomes
        .iter()
        .map(|&(a, b)| {
            Check::flag(&format!("classification_alpha_{a}"), b == (a > 12.0))
        })
        .collect();

    let lo = outcomes.iter().filter(|o| !o.1).map(|o| o.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = outcomes.iter().filter(|o| o.1).map(|o| o.0).fold(f64::INFINITY, f64::min);
    let mut bracket = None;
    let mut threshold = None;
    let threshold_note;
    if hi == f64::INFINITY {
        threshold_note = format!("> {lo}");
    } else if lo == f64::NEG_INFINITY {
        threshold_note = format!("< {hi}");
    } else if lo > hi {
        threshold_note = "inconsistent outcomes".into();
    } else {
        let (mut a, mut b) = (lo, hi);
        while b - a > BISECTION_WIDTH {
            let mid = 0.5 * (a + b);
            let run = run_breaking(mid, mid + settle, s)?;
            let out = broke(&run);
            outcomes.push((mid, out));
            if out {
                b = mid;
            } else {
                a = mid;
            }
        }
        bracket = Some((a, b));
        threshold = Some(0.5 * (a + b));
        threshold_note = format!("{}", 0.5 * (a + b));
    }
    if let Some(t) = threshold {
        checks.push(Check::at_most("threshold_estimate_offset", (t - 12.0).abs(), delta));
    }
    Ok(SweepReport {
        runs,
        outcomes,
        bracket,
        threshold,
        threshold_note,
        checks,
    })
}

/// Reference steady state of `F ≡ a` in closed form, sampled on `grid`.
pub fn constant_force_reference(a: f64, grid: &Grid) -> Result<Profile> {
    Ok(solve_constant_force(&OperatorSpec::tv_plus_linear(), a)?.sample(grid))
}
