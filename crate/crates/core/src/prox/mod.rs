//! The backward-Euler step as a resolvent.
//!
//! One step maps the previous state `g` to the unique minimizer of
//!
//! ```text
//!   J(u) = Σ_i h (u_i - g_i)^2 / (2τ) + Σ_e h W(Du_e) - Σ_i h f_i u_i
//! ```
//!
//! over Dirichlet profiles, where `W` is the primitive of `L` and
//! `Du_e = (u_{e+1} - u_e) / h`. The solvers work on the edge fluxes `σ_e`
//! (the dual variables): the interior balance
//!
//! ```text
//!   (u_i - g_i)/τ - (σ_i - σ_{i-1})/h = f_i
//! ```
//!
//! defines `u` from `σ`, so every iterate is a certificate whose only defect is
//! the inclusion `σ_e ∈ L(Du_e)`.

mod chain;
mod newton;
mod oracle;

pub use oracle::brute_force_step_oracle;

use crate::error::{Error, Result};
use crate::model::{Grid, OperatorKind, OperatorSpec, Profile};

/// Data of one implicit step.
#[derive(Debug, Clone)]
pub struct StepProblem {
    g: Profile,
    f: Vec<f64>,
    tau: f64,
    op: OperatorSpec,
    grid: Grid,
}

impl StepProblem {
    /// `f` holds one force value per node (end values are ignored).
    pub fn new(g: Profile, f: Vec<f64>, tau: f64, op: OperatorSpec) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be > 0, got {tau}")));
        }
        let grid = Grid::new(g.n_cells())?;
        if f.len() != grid.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "force slice has {} values, grid has {} nodes",
                f.len(),
                grid.n_nodes()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite force value".into()));
        }
        Ok(Self {
            g,
            f,
            tau,
            op,
            grid,
        })
    }

    pub fn g(&self) -> &Profile {
        &self.g
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn op(&self) -> &OperatorSpec {
        &self.op
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `y_i = g_i + τ f_i` at interior nodes, zero at the ends.
    pub(crate) fn shifted_data(&self) -> Vec<f64> {
        let n = self.grid.n_cells();
        let g = self.g.values();
        (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    0.0
                } else {
                    g[i] + self.tau * self.f[i]
                }
            })
            .collect()
    }

    fn f_sup(&self) -> f64 {
        let n = self.grid.n_cells();
        self.f[1..n].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Flux certificate for a step result.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCertificate {
    /// `σ_{i+1/2}` for the `n` edges.
    pub flux: Vec<f64>,
    /// Largest distance from `σ_e` to `L(Du_e)`.
    pub residual: f64,
    /// Primal minus dual objective.
    pub gap_estimate: f64,
    pub iterations: usize,
}

/// `1e-10 · max(1, ||g||_∞/τ + ||f||_∞)`.
pub fn default_tolerance(p: &StepProblem) -> f64 {
    1e-10 * (p.g.sup_norm() / p.tau + p.f_sup()).max(1.0)
}

const MAX_ITER: usize = 500;

/// Solves one implicit step with a cold start.
pub fn implicit_step(p: &StepProblem, tol: f64) -> Result<(Profile, StepCertificate)> {
    implicit_step_warm(p, tol, None)
}

/// Solves one implicit step, starting the flux iteration from `warm` when given
/// (typically the previous step's certificate).
pub fn implicit_step_warm(
    p: &StepProblem,
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<(Profile, StepCertificate)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let n = p.grid.n_cells();
    let init = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => initial_flux(p),
    };
    let (sigma, iterations) = match p.op.kind() {
        OperatorKind::TvOnly => (chain::flux_for(p, &chain::solve_primal(p)), 1),
        _ if p.op.has_strict_regular_part() => newton::solve(p, tol, init, MAX_ITER)?,
        _ => {
            return Err(Error::UnsupportedOperator(
                "step solver needs L_r' > 0 everywhere or L_r = 0".into(),
            ))
        }
    };
    let y = p.shifted_data();
    let u = primal_from_flux(&y, &sigma, p.tau / p.grid.h());
    let profile = Profile::new(u)?;
    let residual = inclusion_residual(&profile, &sigma, p)?;
    let gap_estimate = duality_gap(p, &profile, &sigma);
    Ok((
        profile,
        StepCertificate {
            flux: sigma,
            residual,
            gap_estimate,
            iterations,
        },
    ))
}

/// Flux selection from the slopes of `g`.
fn initial_flux(p: &StepProblem) -> Vec<f64> {
    let c = p.op.jump_center();
    p.g.slopes()
        .into_iter()
        .map(|s| {
            let iv = p.op.eval(s);
            if iv.is_singleton() {
                iv.lo
            } else {
                c
            }
        })
        .collect()
}

/// `u_i = y_i + (τ/h)(σ_i - σ_{i-1})` with zero end values.
pub(crate) fn primal_from_flux(y: &[f64], sigma: &[f64], ratio: f64) -> Vec<f64> {
    let n = sigma.len();
    let mut u = vec![0.0; n + 1];
    for i in 1..n {
        u[i] = y[i] + ratio * (sigma[i] - sigma[i - 1]);
    }
    u
}

/// Slope perturbation attributable to rounding in `u`.
pub(crate) fn slope_roundoff(scale_u: f64, h: f64) -> f64 {
    32.0 * f64::EPSILON * scale_u.max(f64::MIN_POSITIVE) / h
}

/// Largest `dist(σ_e, L([p_e - η, p_e + η]))` and the edge where it occurs.
pub(crate) fn flux_violation(op: &OperatorSpec, u: &[f64], sigma: &[f64], h: f64, eta: f64) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (e, s) in sigma.iter().enumerate() {
        let p = (u[e + 1] - u[e]) / h;
        let d = op.eval_hull(p, eta).distance(*s);
        if d > worst.0 {
            worst = (d, e);
        }
    }
    worst
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximal inclusion violation of a flux certificate.
///
/// The certificate must satisfy the discrete balance at every interior node
/// up to rounding; otherwise [`Error::MalformedCertificate`] is returned.
/// Slopes are compared with a rounding allowance `η = 32 ε U / h`, `U` the
/// magnitude of the nodal quantities involved.
pub fn inclusion_residual(u: &Profile, flux: &[f64], p: &StepProblem) -> Result<f64> {
    let n = p.grid.n_cells();
    if u.n_cells() != n || flux.len() != n {
        return Err(Error::InvalidArgument(format!(
            "certificate sizes ({} cells, {} fluxes) do not match the {n}-cell problem",
            u.n_cells(),
            flux.len()
        )));
    }
    let h = p.grid.h();
    let tau = p.tau;
    let uv = u.values();
    let g = p.g.values();
    let mut scale = sup(flux) * 2.0 / h;
    scale = scale.max(p.f_sup()).max(1.0);
    for i in 1..n {
        scale = scale.max((uv[i] - g[i]).abs() / tau);
    }
    let mut worst = (0.0, 0);
    for i in 1..n {
        let imb = ((uv[i] - g[i]) / tau - (flux[i] - flux[i - 1]) / h - p.f[i]).abs();
        if imb > worst.0 {
            worst = (imb, i);
        }
    }
    if worst.0 > 1e-10 * scale {
        return Err(Error::MalformedCertificate {
            max_imbalance: worst.0,
            node: worst.1,
        });
    }
    let y_sup = sup(&p.shifted_data());
    let eta = slope_roundoff(sup(uv).max(y_sup).max(tau / h * sup(flux)), h);
    Ok(flux_violation(&p.op, uv, flux, h, eta).0)
}

/// The step objective `J(u)`.
pub fn step_objective(p: &StepProblem, u: &Profile) -> f64 {
    step_objective_values(p, u.values())
}

pub(crate) fn step_objective_values(p: &StepProblem, u: &[f64]) -> f64 {
    let n = p.grid.n_cells();
    let h = p.grid.h();
    let g = p.g.values();
    let mut j = 0.0;
    for i in 1..n {
        let d = u[i] - g[i];
        j += h * (d * d / (2.0 * p.tau) - p.f[i] * u[i]);
    }
    for e in 0..n {
        j += h * p.op.energy((u[e + 1] - u[e]) / h);
    }
    j
}

/// Dual objective `G(σ)` (minimized); `J(u(σ)) - C + G(σ)` is the gap.
pub(crate) fn dual_objective(op: &OperatorSpec, y: &[f64], sigma: &[f64], ratio: f64, h: f64) -> f64 {
    let n = sigma.len();
    let mut quad = 0.0;
    let mut lin = 0.0;
    for i in 1..n {
        let d = sigma[i - 1] - sigma[i];
        quad += d * d;
        lin += y[i] * d;
    }
    let conj: f64 = sigma.iter().map(|&s| op.conjugate(s)).sum();
    0.5 * ratio * quad - lin + h * conj
}

fn duality_gap(p: &StepProblem, u: &Profile, sigma: &[f64]) -> f64 {
    let h = p.grid.h();
    let y = p.shifted_data();
    let uv = u.values();
    let n = p.grid.n_cells();
    let mut primal = 0.0;
    for i in 1..n {
        let d = uv[i] - y[i];
        primal += h * d * d / (2.0 * p.tau);
    }
    for e in 0..n {
        primal += h * p.op.energy((uv[e + 1] - uv[e]) / h);
    }
    let clipped: Vec<f64>;
    let sigma = if p.op.kind() == OperatorKind::TvOnly {
        clipped = sigma.iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        &clipped[..]
    } else {
        sigma
    };
    (primal + dual_objective(&p.op, &y, sigma, p.tau / h, h)).max(0.0)
}
