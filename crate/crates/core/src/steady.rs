//! Stationary problem `(L(u_x))_x = F`, `u(0) = u(1) = 0`.
//!
//! Closed forms cover `L(p) = p + sgn p` with a constant force and with the
//! three-level force `f_α`; a general discrete solver handles any
//! piecewise-constant force. Throughout this module the flux satisfies
//! `σ' = F`, so a minimum facet carries a flux rise of `+2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ForceField, Grid, OperatorKind, OperatorSpec, PiecewiseConstant, Profile, Sampling};
use crate::prox::slope_roundoff;

/// Polynomial `Σ_k coeffs[k] (x - x0)^k` on `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyPiece {
    pub start: f64,
    pub end: f64,
    pub x0: f64,
    pub coeffs: Vec<f64>,
}

impl PolyPiece {
    fn new(start: f64, end: f64, x0: f64, coeffs: Vec<f64>) -> Self {
        Self { start, end, x0, coeffs }
    }

    pub fn value(&self, x: f64) -> f64 {
        let s = x - self.x0;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let s = x - self.x0;
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * s + k as f64 * c)
    }

    /// `x ↦ sign * p(1 - x)` on the mirrored interval.
    fn mirrored(&self, sign: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { sign * c } else { -sign * c })
            .collect();
        Self::new(1.0 - self.end, 1.0 - self.start, 1.0 - self.x0, coeffs)
    }
}

/// Sorted, contiguous polynomial pieces covering `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewisePolynomial {
    pub pieces: Vec<PolyPiece>,
}

impl PiecewisePolynomial {
    fn piece(&self, x: f64) -> &PolyPiece {
        let k = self.pieces.partition_point(|p| p.end <= x);
        &self.pieces[k.min(self.pieces.len() - 1)]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.piece(x).value(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.piece(x).derivative(x)
    }

    /// Completes a left half `[0, 1/2]` by the mirror image.
    fn symmetric(left: Vec<PolyPiece>, sign: f64) -> Self {
        let mut pieces = left.clone();
        pieces.extend(left.iter().rev().map(|p| p.mirrored(sign)));
        Self { pieces }
    }
}

/// A flat piece `[left, right]` of a steady solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyFacet {
    pub left: f64,
    pub right: f64,
    pub level: f64,
}

/// Closed-form steady state with its flux selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadySolution {
    pub profile: PiecewisePolynomial,
    pub facets: Vec<SteadyFacet>,
    pub flux: PiecewisePolynomial,
}

impl SteadySolution {
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        self.profile.value(x)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.profile.derivative(x)
    }

    pub fn flux_at(&self, x: f64) -> f64 {
        self.flux.value(x)
    }

    /// Nodal samples. Symmetric solutions are sampled on the left half and
    /// mirrored so that `u_i = u_{n-i}` holds exactly.
    pub fn sample(&self, grid: &Grid) -> Profile {
        let n = grid.n_cells();
        let mut v = vec![0.0; n + 1];
        for i in 1..=n / 2 {
            v[i] = self.value(grid.x(i));
            v[n - i] = v[i];
        }
        Profile::new(v).expect("sampled steady profile is Dirichlet")
    }
}

fn require_linear(op: &OperatorSpec) -> Result<()> {
    if op.kind() != OperatorKind::TvPlusLinear {
        return Err(Error::UnsupportedOperator(
            "closed-form steady states assume L(p) = p + sgn p".into(),
        ));
    }
    Ok(())
}

/// Steady state for `F ≡ a` and `L(p) = p + sgn p`.
///
/// For `a <= 2` the zero profile is stationary. Otherwise the profile has one
/// minimum facet `[1/2 - 1/a, 1/2 + 1/a]` joined to the boundary by parabolic
/// arms with `u_xx = a`.
pub fn solve_constant_force(op: &OperatorSpec, a: f64) -> Result<SteadySolution> {
    require_linear(op)?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("force amplitude must be >= 0, got {a}")));
    }
    let flux = PiecewisePolynomial {
        pieces: vec![PolyPiece::new(0.0, 1.0, 0.5, vec![0.0, a])],
    };
    if a <= 2.0 {
        return Ok(SteadySolution {
            profile: PiecewisePolynomial {
                pieces: vec![PolyPiece::new(0.0, 1.0, 0.5, vec![0.0])],
            },
            facets: vec![SteadyFacet {
                left: 0.0,
                right: 1.0,
                level: 0.0,
            }],
            flux,
        });
    }
    let xi = 0.5 - 1.0 / a;
    let level = -0.5 * a * xi * xi;
    let left = vec![
        PolyPiece::new(0.0, xi, xi, vec![level, 0.0, 0.5 * a]),
        PolyPiece::new(xi, 0.5, 0.5, vec![level]),
    ];
    Ok(SteadySolution {
        profile: PiecewisePolynomial::symmetric(left, 1.0),
        facets: vec![SteadyFacet {
            left: xi,
            right: 1.0 - xi,
            level,
        }],
        flux,
    })
}

/// Facet endpoints `(c, e)` of the three-facet state: the minimum facet is
/// `[1/4, c]`, the maximum facet `[e, 1 - e]`. Defined for `α >= 12`; at
/// `α = 12` both equal `3/8`.
pub fn three_facet_endpoints(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha >= 12.0 && alpha.is_finite()) {
        return Err(Error::RefusedNoBreaking { alpha });
    }
    Ok((2.0 / (4.0 + alpha) + 0.25, 0.5 + 1.0 / (4.0 - alpha)))
}

/// `∫_c^e f_α`, which vanishes for the three-facet construction.
pub fn three_facet_compatibility(alpha: f64) -> Result<f64> {
    let (c, e) = three_facet_endpoints(alpha)?;
    Ok(ForceField::alpha_slice(alpha).integral(c, e))
}

/// Steady state of `(L(u_x))_x = f_α` for `α > 12` and `L(p) = p + sgn p`:
/// minimum facets `[1/4, c]`, `[1 - c, 3/4]` and a maximum facet `[e, 1 - e]`.
pub fn solve_three_facet(op: &OperatorSpec, alpha: f64) -> Result<SteadySolution> {
    require_linear(op)?;
    if !(alpha > 12.0 && alpha.is_finite()) {
        return Err(Error::RefusedNoBreaking { alpha });
    }
    let (c, e) = three_facet_endpoints(alpha)?;
    let compat = three_facet_compatibility(alpha)?;
    let scale = 4.0 + alpha;
    if compat.abs() > 64.0 * f64::EPSILON * scale {
        return Err(Error::InvalidArgument(format!(
            "compatibility integral {compat:e} does not vanish for alpha = {alpha}"
        )));
    }
    let q = 0.375;
    let hi = 4.0 + alpha;
    let lo = 4.0 - alpha;
    let m = -0.125;
    let u_q = m + 0.5 * hi * (q - c) * (q - c);
    let p_q = hi * (q - c);
    let d = e - q;
    let top = u_q + p_q * d + 0.5 * lo * d * d;

    let profile = PiecewisePolynomial::symmetric(
        vec![
            PolyPiece::new(0.0, 0.25, 0.25, vec![m, 0.0, 2.0]),
            PolyPiece::new(0.25, c, c, vec![m]),
            PolyPiece::new(c, q, c, vec![m, 0.0, 0.5 * hi]),
            PolyPiece::new(q, e, e, vec![top, 0.0, 0.5 * lo]),
            PolyPiece::new(e, 0.5, 0.5, vec![top]),
        ],
        1.0,
    );
    // σ(0) = -2 and σ' = f_α on the left half; odd about x = 1/2.
    let flux = PiecewisePolynomial::symmetric(
        vec![
            PolyPiece::new(0.0, 0.25, 0.0, vec![-2.0, 4.0]),
            PolyPiece::new(0.25, q, 0.25, vec![-1.0, hi]),
            PolyPiece::new(q, 0.5, 0.5, vec![0.0, lo]),
        ],
        -1.0,
    );
    Ok(SteadySolution {
        profile,
        facets: vec![
            SteadyFacet {
                left: 0.25,
                right: c,
                level: m,
            },
            SteadyFacet {
                left: e,
                right: 1.0 - e,
                level: top,
            },
            SteadyFacet {
                left: 1.0 - c,
                right: 0.75,
                level: m,
            },
        ],
        flux,
    })
}

/// Discrete steady state with its flux certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSteady {
    pub profile: Profile,
    /// Edge fluxes `σ_e`, with `(σ_i - σ_{i-1}) / h = F_i` at interior nodes.
    pub flux: Vec<f64>,
    pub residual: f64,
}

/// Partial sums `S_e = h Σ_{j=1..e} F_j`, one per edge.
fn flux_offsets(force: &[f64], h: f64) -> Vec<f64> {
    let n = force.len() - 1;
    let mut s = vec![0.0; n];
    for e in 1..n {
        s[e] = s[e - 1] + h * force[e];
    }
    s
}

fn min_max(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Minimizer of `Σ_e h W(Du_e) + Σ_i h F_i u_i` over Dirichlet profiles.
///
/// The discrete Euler-Lagrange system fixes the flux up to one constant
/// `σ_0`, which is found from the Dirichlet condition `Σ_e L⁻¹(σ_e) = 0`
/// (a monotone scalar equation). For `L = sgn` the energy is bounded below only
/// when the fluxes fit into a band of width 2.
pub fn solve_steady_numeric(
    op: &OperatorSpec,
    force: &PiecewiseConstant,
    grid: &Grid,
    sampling: Sampling,
    tol: f64,
) -> Result<NumericSteady> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let n = grid.n_cells();
    let h = grid.h();
    let f = force.sample(grid, sampling);
    let s = flux_offsets(&f, h);
    let (s_lo, s_hi) = min_max(s.iter().copied());
    let c = op.jump_center();

    let (sigma0, u) = if s_hi - s_lo <= 2.0 {
        (c - 0.5 * (s_lo + s_hi), vec![0.0; n + 1])
    } else {
        if !op.has_strict_regular_part() {
            return match op.kind() {
                OperatorKind::TvOnly => Err(Error::NoMinimizer(format!(
                    "flux range {:.6} exceeds the jump width 2",
                    s_hi - s_lo
                ))),
                _ => Err(Error::UnsupportedOperator(
                    "steady solver needs L_r' > 0 everywhere or L_r = 0".into(),
                )),
            };
        }
        let phi = |s0: f64| -> f64 { s.iter().map(|&se| op.inverse_strict(s0 + se)).sum() };
        // φ < 0 below the band of every edge, > 0 above it
        let mut a = c - 1.0 - s_hi - 1.0;
        let mut b = c + 1.0 - s_lo + 1.0;
        while phi(a) > 0.0 {
            a -= b - a;
        }
        while phi(b) < 0.0 {
            b += b - a;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if phi(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let s0 = if phi(b).abs() < phi(a).abs() { b } else { a };
        let mut u = vec![0.0; n + 1];
        for e in 0..n {
            u[e + 1] = u[e] + h * op.inverse_strict(s0 + s[e]);
        }
        // remove the rounding drift at x = 1
        let drift = u[n];
        for (i, v) in u.iter_mut().enumerate() {
            *v -= drift * (i as f64 / n as f64);
        }
        u[n] = 0.0;
        (s0, u)
    };

    let flux: Vec<f64> = s.iter().map(|se| sigma0 + se).collect();
    let u_sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let eta = slope_roundoff(u_sup.max(h), h);
    let residual = flux
        .iter()
        .enumerate()
        .map(|(e, &sg)| op.eval_hull((u[e + 1] - u[e]) / h, eta).distance(sg))
        .fold(0.0, f64::max);
    if residual > tol {
        return Err(Error::NotConverged {
            iterations: 200,
            best_residual: residual,
        });
    }
    Ok(NumericSteady {
        profile: Profile::new(u)?,
        flux,
        residual,
    })
}

/// Outcome of a steady-state verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyVerification {
    /// Worst distance from the reconstructed flux to `L(u_x)`.
    pub violation: f64,
    /// Where the worst distance occurs.
    pub location: f64,
    /// Flux value at `x = 0` minimizing the worst distance.
    pub sigma0: f64,
    pub pass: bool,
}

/// Given flux offsets `s_k` and admissible intervals `[lo_k, hi_k]`, the best
/// constant shift and the resulting worst violation with its index.
fn best_shift(offsets: &[f64], bounds: &[(f64, f64)]) -> (f64, f64, usize) {
    let mut a = (f64::NEG_INFINITY, 0);
    let mut b = (f64::INFINITY, 0);
    for (k, (&s, &(lo, hi))) in offsets.iter().zip(bounds).enumerate() {
        if lo - s > a.0 {
            a = (lo - s, k);
        }
        if hi - s < b.0 {
            b = (hi - s, k);
        }
    }
    let sigma0 = 0.5 * (a.0 + b.0);
    let violation = (0.5 * (a.0 - b.0)).max(0.0);
    (sigma0, violation, if a.0 - sigma0 >= sigma0 - b.0 { a.1 } else { b.1 })
}

/// Checks a discrete profile against `(L(u_x))_x = F`: the flux is rebuilt as
/// `σ_e = σ_0 + h Σ_{j<=e} F_j` and `σ_0` is chosen to minimize the worst
/// inclusion violation (in closed form, since the violation is the maximum of
/// two affine functions of `σ_0`).
pub fn verify_steady_profile(
    u: &Profile,
    op: &OperatorSpec,
    force: &PiecewiseConstant,
    sampling: Sampling,
    tol: f64,
) -> SteadyVerification {
    let grid = u.grid();
    let h = grid.h();
    let f = force.sample(&grid, sampling);
    let s = flux_offsets(&f, h);
    let eta = slope_roundoff(u.sup_norm().max(h), h);
    let bounds: Vec<(f64, f64)> = u
        .slopes()
        .into_iter()
        .map(|p| {
            let iv = op.eval_hull(p, eta);
            (iv.lo, iv.hi)
        })
        .collect();
    let (sigma0, violation, k) = best_shift(&s, &bounds);
    SteadyVerification {
        violation,
        location: (k as f64 + 0.5) * h,
        sigma0,
        pass: violation <= tol,
    }
}

/// Continuum check of a closed-form solution on `samples` equally spaced
/// points plus every piece boundary of the profile.
pub fn verify_steady_solution(
    sol: &SteadySolution,
    op: &OperatorSpec,
    force: &PiecewiseConstant,
    samples: usize,
    tol: f64,
) -> SteadyVerification {
    let mut xs: Vec<f64> = (0..samples).map(|k| (k as f64 + 0.5) / samples as f64).collect();
    for p in &sol.profile.pieces {
        xs.push(p.start);
        xs.push(p.end);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let scale = sol.profile.pieces.iter().fold(1.0_f64, |m, p| {
        m.max(p.coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs())))
    });
    let offsets: Vec<f64> = xs.iter().map(|&x| force.primitive(x)).collect();
    let bounds: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| {
            let p = sol.slope(x);
            // slopes within rounding of zero sit on the jump
            let p = if p.abs() <= 64.0 * f64::EPSILON * scale { 0.0 } else { p };
            let iv = op.eval(p);
            (iv.lo, iv.hi)
        })
        .collect();
    let (sigma0, violation, k) = best_shift(&offsets, &bounds);
    SteadyVerification {
        violation,
        location: xs[k],
        sigma0,
        pass: violation <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1() -> OperatorSpec {
        OperatorSpec::tv_plus_linear()
    }

    #[test]
    fn constant_force_four() {
        let s = solve_constant_force(&l1(), 4.0).unwrap();
        assert_eq!(s.facets.len(), 1);
        assert_eq!((s.facets[0].left, s.facets[0].right), (0.25, 0.75));
        assert_eq!(s.facets[0].level, -0.125);
        // arm u = 2x^2 - x
        for &x in &[0.05, 0.1, 0.2] {
            assert!((s.value(x) - (2.0 * x * x - x)).abs() < 1e-15);
            assert!((s.value(1.0 - x) - (2.0 * x * x - x)).abs() < 1e-15);
        }
        assert_eq!(s.flux_at(0.0), -2.0);
        assert_eq!(s.flux_at(1.0), 2.0);
    }

    #[test]
    fn small_constant_force_is_zero() {
        let s = solve_constant_force(&l1(), 0.0).unwrap();
        assert_eq!(s.value(0.3), 0.0);
        assert_eq!(s.flux_at(0.3), 0.0);
        let s = solve_constant_force(&l1(), 2.0).unwrap();
        assert!(s.flux_at(0.0) >= -1.0 && s.flux_at(1.0) <= 1.0);
    }

    #[test]
    fn rejects_other_operators() {
        assert!(solve_constant_force(&OperatorSpec::tv_only(), 4.0).is_err());
        assert!(solve_three_facet(&OperatorSpec::tv_only(), 16.0).is_err());
    }

    #[test]
    fn three_facet_endpoints_match_formulas() {
        let (c, e) = three_facet_endpoints(12.0).unwrap();
        assert_eq!((c, e), (0.375, 0.375));
        let (c, e) = three_facet_endpoints(16.0).unwrap();
        assert!((c - 0.35).abs() < 1e-15);
        assert!((e - (0.5 - 1.0 / 12.0)).abs() < 1e-15);
        let (c, e) = three_facet_endpoints(28.0).unwrap();
        assert!((c - 0.3125).abs() < 1e-15);
        assert!((e - (0.5 - 1.0 / 24.0)).abs() < 1e-15);
        assert!(matches!(
            solve_three_facet(&l1(), 12.0),
            Err(Error::RefusedNoBreaking { .. })
        ));
    }

    #[test]
    fn three_facet_levels() {
        for &a in &[13.0, 16.0, 24.0, 40.0] {
            let s = solve_three_facet(&l1(), a).unwrap();
            let u38 = -0.125 + (a - 12.0) * (a - 12.0) / (128.0 * (4.0 + a));
            let top = u38 + (a - 12.0) * (a - 12.0) / (128.0 * (a - 4.0));
            assert!((s.value(0.375) - u38).abs() < 1e-14);
            assert!((s.facets[1].level - top).abs() < 1e-14);
            assert!((s.slope(0.375) - (a - 12.0) / 8.0).abs() < 1e-13);
            // C¹ at every piece boundary
            for p in &s.profile.pieces {
                for &x in &[p.start, p.end] {
                    if x > 0.0 && x < 1.0 {
                        let l = s.profile.value(x - 1e-9);
                        let r = s.profile.value(x + 1e-9);
                        assert!((l - r).abs() < 1e-7);
                    }
                }
            }
            assert!(three_facet_compatibility(a).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_zero_force() {
        let g = Grid::new(64).unwrap();
        let r = solve_steady_numeric(&l1(), &PiecewiseConstant::constant(0.0), &g, Sampling::CellAverage, 1e-10)
            .unwrap();
        assert_eq!(r.profile.sup_norm(), 0.0);
    }

    #[test]
    fn tv_only_without_minimizer() {
        let g = Grid::new(64).unwrap();
        let r = solve_steady_numeric(
            &OperatorSpec::tv_only(),
            &PiecewiseConstant::constant(4.0),
            &g,
            Sampling::CellAverage,
            1e-10,
        );
        assert!(matches!(r, Err(Error::NoMinimizer(_))));
    }

    #[test]
    fn verification_of_zero_profile() {
        let g = Grid::new(64).unwrap();
        let z = Profile::zeros(&g);
        let v = verify_steady_profile(&z, &l1(), &PiecewiseConstant::constant(1.5), Sampling::CellAverage, 1e-12);
        assert!(v.pass && v.violation == 0.0);
        let v = verify_steady_profile(&z, &l1(), &PiecewiseConstant::constant(4.0), Sampling::CellAverage, 1e-12);
        assert!(!v.pass);
        assert!(v.violation >= 1.0 - 2.0 * g.h() - 1e-12);
    }

    #[test]
    fn analytic_solutions_verify() {
        let s = solve_three_facet(&l1(), 16.0).unwrap();
        let v = verify_steady_solution(&s, &l1(), &ForceField::alpha_slice(16.0), 4096, 1e-12);
        assert!(v.pass, "{v:?}");
        assert!((v.sigma0 + 2.0).abs() < 1e-12);
        let s = solve_constant_force(&l1(), 4.0).unwrap();
        let v = verify_steady_solution(&s, &l1(), &PiecewiseConstant::constant(4.0), 4096, 1e-12);
        assert!(v.pass, "{v:?}");
    }
}
