//! Backward-Euler time integration with per-step diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::facets::{creation_bound_check, detect_facets_default, local_extrema, CreationCheck, FacetSet};
use crate::model::{ForceField, OperatorSpec, Profile, Sampling};
use crate::prox::{default_tolerance, implicit_step_warm, StepProblem};

/// Time-stepping parameters.
#[derive(Debug, Clone)]
pub struct EvolveConfig {
    pub op: OperatorSpec,
    pub tau: f64,
    pub t_final: f64,
    /// Step tolerance; the per-step default when `None`.
    pub tol: Option<f64>,
    pub sampling: Sampling,
    /// Requested snapshot times; each is taken at the nearest step.
    pub snapshot_times: Vec<f64>,
    pub target: Option<Profile>,
    /// Run the facet length bound at every step with `t >= 10τ`.
    pub check_creation: bool,
}

impl EvolveConfig {
    pub fn new(op: OperatorSpec, tau: f64, t_final: f64) -> Self {
        Self {
            op,
            tau,
            t_final,
            tol: None,
            sampling: Sampling::default(),
            snapshot_times: Vec::new(),
            target: None,
            check_creation: true,
        }
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.tau) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    #[serde(skip)]
    pub profile: Profile,
    pub facets: FacetSet,
}

/// A failed facet length bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CreationFailure {
    pub step: usize,
    pub time: f64,
    pub left: f64,
    pub right: f64,
    pub check: CreationCheck,
}

/// Diagnostic series; entry `k` belongs to the state after step `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub times: Vec<f64>,
    /// `max_i |u^{k+1}_i - u^k_i| / τ`.
    pub ut_sup: Vec<f64>,
    /// `sqrt(h Σ_i ((u^{k+1}_i - u^k_i) / τ)^2)`.
    pub ut_l2: Vec<f64>,
    pub tv_slope: Vec<f64>,
    pub l2_to_target: Option<Vec<f64>>,
    /// MIN plus MAX facets at the default detection parameters.
    pub n_facets: Vec<usize>,
    /// `||f(t)||_∞` of the continuous force.
    pub f_sup: Vec<f64>,
    /// `||u(t) - u0||_∞`.
    pub sup_dev_initial: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Smallest `length - (bound - 2h)` over all checked extrema.
    pub creation_min_margin: Option<f64>,
    pub creation_checked: usize,
    pub creation_failures: Vec<CreationFailure>,
    pub tv_initial: f64,
    #[serde(skip)]
    pub final_profile: Profile,
    #[serde(skip)]
    pub final_flux: Vec<f64>,
    pub tau: f64,
}

impl TrajectoryReport {
    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    /// Largest `ut_sup` over all steps.
    pub fn max_ut_sup(&self) -> f64 {
        self.ut_sup.iter().fold(0.0, |m, v| m.max(*v))
    }
}

fn force_nodes(base: &[f64], ramp: &[f64], force: &ForceField, t: f64, out: &mut [f64]) {
    let w = force.time_law().weight(t);
    let s = force.sign();
    for i in 0..out.len() {
        out[i] = s * (base[i] + w * ramp[i]);
    }
}

/// Runs `⌈T/τ⌉` implicit steps from `u0`, evaluating the force at the end of
/// each step.
pub fn evolve(u0: &Profile, force: &ForceField, cfg: &EvolveConfig) -> Result<TrajectoryReport> {
    evolve_with(u0, force, cfg, |_, _, _| {})
}

/// As [`evolve`], calling `observe(step, time, profile)` after every step.
pub fn evolve_with(
    u0: &Profile,
    force: &ForceField,
    cfg: &EvolveConfig,
    mut observe: impl FnMut(usize, f64, &Profile),
) -> Result<TrajectoryReport> {
    let tau = cfg.tau;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be > 0, got {tau}")));
    }
    if !(cfg.t_final >= tau * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "final time {} is shorter than one step {tau}",
            cfg.t_final
        )));
    }
    let grid = u0.grid();
    if let Some(t) = &cfg.target {
        if t.n_cells() != grid.n_cells() {
            return Err(Error::InvalidArgument("target profile is on a different grid".into()));
        }
    }
    let n = grid.n_cells();
    let h = grid.h();
    let steps = cfg.n_steps();
    let (base, ramp) = force.sample_parts(&grid, cfg.sampling);
    let mut f = vec![0.0; n + 1];

    let mut snap_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|&s| (((s / tau).round() as usize).clamp(1, steps), s))
        .collect();
    snap_steps.sort_by_key(|s| s.0);
    snap_steps.dedup_by_key(|s| s.0);
    let mut next_snap = 0;

    let mut report = TrajectoryReport {
        times: Vec::with_capacity(steps),
        ut_sup: Vec::with_capacity(steps),
        ut_l2: Vec::with_capacity(steps),
        tv_slope: Vec::with_capacity(steps),
        l2_to_target: cfg.target.as_ref().map(|_| Vec::with_capacity(steps)),
        n_facets: Vec::with_capacity(steps),
        f_sup: Vec::with_capacity(steps),
        sup_dev_initial: Vec::with_capacity(steps),
        snapshots: Vec::new(),
        creation_min_margin: None,
        creation_checked: 0,
        creation_failures: Vec::new(),
        tv_initial: u0.slope_total_variation(),
        final_profile: u0.clone(),
        final_flux: Vec::new(),
        tau,
    };

    let mut u = u0.clone();
    let mut warm: Option<Vec<f64>> = None;
    for k in 1..=steps {
        let t = k as f64 * tau;
        force_nodes(&base, &ramp, force, t, &mut f);
        let problem = StepProblem::new(u.clone(), f.clone(), tau, cfg.op.clone())?;
        let tol = cfg.tol.unwrap_or_else(|| default_tolerance(&problem));
        let (next, cert) = implicit_step_warm(&problem, tol, warm.as_deref()).map_err(|e| Error::StepFailed {
            step: k,
            source: Box::new(e),
        })?;

        let (mut sup, mut sq) = (0.0_f64, 0.0);
        for (a, b) in next.values().iter().zip(u.values()) {
            let d = (a - b) / tau;
            sup = sup.max(d.abs());
            sq += d * d;
        }
        let ut_l2 = (h * sq).sqrt();
        let f_sup = force.sup_abs(t);
        report.times.push(t);
        report.ut_sup.push(sup);
        report.ut_l2.push(ut_l2);
        report.tv_slope.push(next.slope_total_variation());
        if let (Some(series), Some(target)) = (report.l2_to_target.as_mut(), cfg.target.as_ref()) {
            series.push(next.l2_distance(target));
        }
        let facets = detect_facets_default(&next);
        report.n_facets.push(facets.n_extremal());
        report.f_sup.push(f_sup);
        report.sup_dev_initial.push(next.sup_distance(u0));

        if cfg.check_creation && k >= 10 {
            for ex in local_extrema(&next, h) {
                if let Ok(check) = creation_bound_check(ex.left, ex.right, ex.kind, f_sup, sup, Some(ut_l2), h) {
                    report.creation_checked += 1;
                    let m = report.creation_min_margin.map_or(check.margin, |v| v.min(check.margin));
                    report.creation_min_margin = Some(m);
                    if !check.pass {
                        report.creation_failures.push(CreationFailure {
                            step: k,
                            time: t,
                            left: ex.left,
                            right: ex.right,
                            check,
                        });
                    }
                }
            }
        }

        if next_snap < snap_steps.len() && snap_steps[next_snap].0 == k {
            report.snapshots.push(Snapshot {
                step: k,
                time: t,
                profile: next.clone(),
                facets,
            });
            next_snap += 1;
        }
        observe(k, t, &next);
        warm = Some(cert.flux);
        u = next;
    }
    report.final_profile = u;
    report.final_flux = warm.unwrap_or_default();
    Ok(report)
}

/// Outcome of the time-derivative bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtBoundCheck {
    pub max_ut_sup: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Checks `max_k ut_sup ≤ (ut0 + ∫||f_t||_∞)(1 + rel) + abs_steps · τ`.
pub fn check_ut_bound(report: &TrajectoryReport, f_t_integral: f64, ut0: f64, rel: f64, abs_steps: f64) -> UtBoundCheck {
    let max_ut_sup = report.max_ut_sup();
    let bound = (ut0 + f_t_integral) * (1.0 + rel) + abs_steps * report.tau;
    UtBoundCheck {
        max_ut_sup,
        bound,
        margin: bound - max_ut_sup,
        pass: max_ut_sup <= bound,
    }
}

/// Default slack: 10% relative plus `10 τ`.
pub fn check_ut_bound_default(report: &TrajectoryReport, f_t_integral: f64, ut0: f64) -> UtBoundCheck {
    check_ut_bound(report, f_t_integral, ut0, 0.1, 10.0)
}

/// First step `k >= 10` at which the slope variation grows more than tenfold
/// over one step, if any.
pub fn tv_monitor(report: &TrajectoryReport) -> Option<usize> {
    let tv = &report.tv_slope;
    (10..tv.len()).find(|&k| tv[k] > 10.0 * tv[k - 1] + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid;

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(32).unwrap();
        let cfg = EvolveConfig::new(OperatorSpec::tv_plus_linear(), 0.01, 0.1);
        let r = evolve(&Profile::zeros(&g), &ForceField::constant(0.0), &cfg).unwrap();
        assert_eq!(r.n_steps(), 10);
        assert!(r.ut_sup.iter().all(|v| *v == 0.0));
        assert_eq!(r.final_profile.sup_norm(), 0.0);
    }

    #[test]
    fn snapshots_at_requested_times() {
        let g = Grid::new(32).unwrap();
        let mut cfg = EvolveConfig::new(OperatorSpec::tv_plus_linear(), 0.01, 0.5);
        cfg.snapshot_times = vec![0.1, 0.25, 0.5];
        let r = evolve(&Profile::tent(&g, 0.5, 0.2), &ForceField::constant(0.0), &cfg).unwrap();
        let ts: Vec<usize> = r.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(ts, vec![10, 25, 50]);
    }

    #[test]
    fn corrupted_ut_fails_the_bound() {
        let g = Grid::new(32).unwrap();
        let cfg = EvolveConfig::new(OperatorSpec::tv_plus_linear(), 0.01, 0.1);
        let mut r = evolve(&Profile::tent(&g, 0.5, 0.2), &ForceField::constant(0.0), &cfg).unwrap();
        let ok = check_ut_bound_default(&r, 0.0, r.max_ut_sup());
        assert!(ok.pass);
        for v in &mut r.ut_sup {
            *v *= 10.0;
        }
        let bad = check_ut_bound(&r, 0.0, r.max_ut_sup() / 10.0, 0.1, 10.0);
        assert!(!bad.pass);
    }
}
