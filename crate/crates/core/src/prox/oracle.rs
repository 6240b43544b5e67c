//! Derivative-free reference minimizer for tiny grids.
//!
//! Independent of the flux solvers: it only evaluates the step objective. An
//! exhaustive lattice scan over `[-B, B]^{n-1}` (`B = ||g||_∞ + τ||f||_∞`, a
//! bound on the minimizer by comparison with constants) is followed by a
//! pattern search along `±` indicators of contiguous node blocks. The objective
//! is convex, and by the coarea formula any non-optimal profile can be improved
//! by moving one level-set block, so these directions suffice.

use super::{step_objective_values, StepProblem};
use crate::error::{Error, Result};
use crate::model::Profile;

const MAX_CELLS: usize = 8;
const LATTICE_BUDGET: f64 = 2.0e6;

/// Approximates the step minimizer to within about `resolution` in each node.
pub fn brute_force_step_oracle(p: &StepProblem, resolution: f64) -> Result<Profile> {
    let n = p.grid().n_cells();
    if n > MAX_CELLS {
        return Err(Error::OracleTooLarge(n));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution must be > 0, got {resolution}")));
    }
    let m = n - 1;
    let f_sup = p.f()[1..n].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let bound = (p.g().sup_norm() + p.tau() * f_sup).max(resolution);

    let k = (LATTICE_BUDGET.powf(1.0 / m as f64).floor() as usize).max(3);
    let step = 2.0 * bound / (k - 1) as f64;
    let mut u = vec![0.0; n + 1];
    let mut best = vec![0.0; n + 1];
    let mut best_j = f64::INFINITY;
    let mut idx = vec![0usize; m];
    loop {
        for (j, &i) in idx.iter().enumerate() {
            u[j + 1] = -bound + step * i as f64;
        }
        let val = step_objective_values(p, &u);
        if val < best_j {
            best_j = val;
            best.copy_from_slice(&u);
        }
        let mut d = 0;
        while d < m {
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == m {
            break;
        }
    }

    let mut delta = step;
    let floor = resolution / 16.0;
    while delta >= floor {
        let mut improved = true;
        while improved {
            improved = false;
            for a in 1..=m {
                for b in a..=m {
                    for sign in [1.0, -1.0] {
                        u.copy_from_slice(&best);
                        for v in &mut u[a..=b] {
                            *v += sign * delta;
                        }
                        let val = step_objective_values(p, &u);
                        if val < best_j {
                            best_j = val;
                            best.copy_from_slice(&u);
                            improved = true;
                        }
                    }
                }
            }
        }
        delta *= 0.5;
    }
    Profile::new(best)
}
