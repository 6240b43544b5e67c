//! Thomas algorithm for tridiagonal systems.

/// Solves `A x = rhs` where `A` has sub-diagonal `lower[1..]`, diagonal
/// `diag` and super-diagonal `upper[..n-1]`. No pivoting; intended for the
/// diagonally dominant systems assembled by the step solvers.
///
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n && out.len() == n);
    if n == 0 {
        return;
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    out[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        out[i] -= c[i + 1] * out[i + 1];
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn solves_laplacian_system() {
        let n = 6;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 2.0 * x_true[i]
                - if i > 0 { x_true[i - 1] } else { 0.0 }
                - if i + 1 < n { x_true[i + 1] } else { 0.0 };
        }
        let mut x = vec![0.0; n];
        super::solve(&lower, &diag, &upper, &rhs, &mut x);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-13);
        }
    }
}
