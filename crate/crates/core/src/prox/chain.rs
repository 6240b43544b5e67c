//! Exact step for `L = sgn` by dynamic programming along the chain.
//!
//! With `a = h/τ` and `y = g + τ f`, the step minimizes
//!
//! ```text
//!   Σ_{i=1}^{n-1} a (u_i - y_i)² / 2 + Σ_{e=0}^{n-1} |u_{e+1} - u_e|,   u_0 = u_n = 0.
//! ```
//!
//! The derivative of the forward cost-to-go `F_k` is nondecreasing and
//! piecewise linear with upward jumps. Minimizing out `u_{k-1}` clamps it to
//! `[-1, 1]`; the clamp points `x⁻_k`, `x⁺_k` give the backward recursion
//! `u_k = clamp(u_{k+1}, x⁻_k, x⁺_k)`. Each stage pushes at most two knots, so
//! the sweep is linear in `n` up to the knots it pops.

use std::collections::VecDeque;

use super::StepProblem;

/// `F'(x) = s x + b` on a segment.
#[derive(Debug, Clone, Copy)]
struct Form {
    s: f64,
    b: f64,
}

impl Form {
    fn at(self, x: f64) -> f64 {
        self.s * x + self.b
    }
}

/// A knot at `t`: crossing it left to right adds `ds x + db`.
#[derive(Debug, Clone, Copy)]
struct Knot {
    t: f64,
    ds: f64,
    db: f64,
}

/// Nondecreasing piecewise linear derivative with forms valid left of the
/// first and right of the last knot.
#[derive(Debug)]
struct Derivative {
    left: Form,
    right: Form,
    knots: VecDeque<Knot>,
}

impl Derivative {
    /// Replaces the part below `level` by the constant `level`; returns the
    /// clamp point. Segments have slope `>= a > 0`.
    fn clamp_below(&mut self, level: f64) -> f64 {
        let mut f = self.left;
        loop {
            let Some(k) = self.knots.front().copied() else {
                let x = (level - f.b) / f.s;
                self.push_front(x, f, level);
                return x;
            };
            if f.at(k.t) >= level {
                let x = ((level - f.b) / f.s).min(k.t);
                self.push_front(x, f, level);
                return x;
            }
            self.knots.pop_front();
            f = Form {
                s: f.s + k.ds,
                b: f.b + k.db,
            };
            if f.at(k.t) >= level {
                self.push_front(k.t, f, level);
                return k.t;
            }
        }
    }

    fn push_front(&mut self, x: f64, f: Form, level: f64) {
        self.left = Form { s: 0.0, b: level };
        self.knots.push_front(Knot {
            t: x,
            ds: f.s,
            db: f.b - level,
        });
    }

    /// Replaces the part above `level` by the constant `level`.
    fn clamp_above(&mut self, level: f64) -> f64 {
        let mut f = self.right;
        loop {
            let Some(k) = self.knots.back().copied() else {
                let x = (level - f.b) / f.s;
                self.push_back(x, f, level);
                return x;
            };
            if f.at(k.t) <= level {
                let x = ((level - f.b) / f.s).max(k.t);
                self.push_back(x, f, level);
                return x;
            }
            self.knots.pop_back();
            f = Form {
                s: f.s - k.ds,
                b: f.b - k.db,
            };
            if f.at(k.t) <= level {
                self.push_back(k.t, f, level);
                return k.t;
            }
        }
    }

    fn push_back(&mut self, x: f64, f: Form, level: f64) {
        self.right = Form { s: 0.0, b: level };
        self.knots.push_back(Knot {
            t: x,
            ds: -f.s,
            db: level - f.b,
        });
    }

    fn add_linear(&mut self, s: f64, b: f64) {
        self.left.s += s;
        self.left.b += b;
        self.right.s += s;
        self.right.b += b;
    }

    /// Adds `sgn(x)`: -1 below 0, +1 above, a jump of 2 at 0.
    fn add_sign(&mut self) {
        self.left.b -= 1.0;
        self.right.b += 1.0;
        let at = self.knots.partition_point(|k| k.t < 0.0);
        self.knots.insert(at, Knot { t: 0.0, ds: 0.0, db: 2.0 });
    }
}

/// Minimizer of the step objective; end values are zero.
pub(super) fn solve_primal(p: &StepProblem) -> Vec<f64> {
    let n = p.grid().n_cells();
    let a = p.grid().h() / p.tau();
    let y = p.shifted_data();
    let m = n - 1;

    // F_1'(x) = a (x - y_1) + sgn(x)
    let mut d = Derivative {
        left: Form { s: a, b: -a * y[1] - 1.0 },
        right: Form { s: a, b: -a * y[1] + 1.0 },
        knots: VecDeque::from([Knot { t: 0.0, ds: 0.0, db: 2.0 }]),
    };
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for k in 1..m {
        lo[k] = d.clamp_below(-1.0);
        hi[k] = d.clamp_above(1.0);
        d.add_linear(a, -a * y[k + 1]);
    }

    let mut u = vec![0.0; n + 1];
    d.add_sign();
    u[m] = d.clamp_below(0.0);
    for k in (1..m).rev() {
        u[k] = u[k + 1].clamp(lo[k], hi[k]);
    }
    u
}

/// Flux certificate for the exact minimizer `u`: `σ_e = σ_0 + a Σ_{i<=e}(u_i - y_i)`
/// with `σ_0` centred in the interval allowed by `σ_e ∈ sgn(u_{e+1} - u_e)`.
pub(super) fn flux_for(p: &StepProblem, u: &[f64]) -> Vec<f64> {
    let n = p.grid().n_cells();
    let a = p.grid().h() / p.tau();
    let y = p.shifted_data();
    let mut s = vec![0.0; n];
    for e in 1..n {
        s[e] = s[e - 1] + a * (u[e] - y[e]);
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for e in 0..n {
        let du = u[e + 1] - u[e];
        let (l, r) = if du > 0.0 {
            (1.0, 1.0)
        } else if du < 0.0 {
            (-1.0, -1.0)
        } else {
            (-1.0, 1.0)
        };
        lo = lo.max(l - s[e]);
        hi = hi.min(r - s[e]);
    }
    let s0 = 0.5 * (lo + hi);
    s.iter().map(|v| s0 + v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grid, OperatorSpec, Profile};
    use crate::prox::step_objective_values;

    fn problem(g: Vec<f64>, f: Vec<f64>, tau: f64) -> StepProblem {
        StepProblem::new(Profile::new(g).unwrap(), f, tau, OperatorSpec::tv_only()).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = Grid::new(8).unwrap();
        let p = StepProblem::new(Profile::zeros(&g), vec![0.0; 9], 0.1, OperatorSpec::tv_only()).unwrap();
        assert!(solve_primal(&p).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn no_coordinate_move_improves() {
        let p = problem(
            vec![0.0, -0.89, -0.97, -0.61, -0.001, 0.0],
            vec![-2.48, -0.99, 1.34, -3.76, -2.29, 3.44],
            0.87,
        );
        let u = solve_primal(&p);
        let j = step_objective_values(&p, &u);
        for a in 1..5 {
            for b in a..5 {
                for d in [1e-6, -1e-6] {
                    let mut v = u.clone();
                    for x in &mut v[a..=b] {
                        *x += d;
                    }
                    assert!(step_objective_values(&p, &v) >= j - 1e-15);
                }
            }
        }
    }

    #[test]
    fn large_force_lifts_a_plateau() {
        // constant f with τ f h n/2 well above the jump: a single interior facet
        let g = Grid::new(16).unwrap();
        let p = StepProblem::new(Profile::zeros(&g), vec![40.0; 17], 1.0, OperatorSpec::tv_only()).unwrap();
        let u = solve_primal(&p);
        let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let flat = u.iter().filter(|v| **v == top).count();
        assert!(top > 0.0 && flat > 2, "{u:?}");
    }
}
