use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0, 1]` into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 4 {
            return Err(Error::InvalidGrid(format!("n_cells must be >= 4, got {n_cells}")));
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Node coordinate `x_i = i / n`; exact at both ends.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_cells).map(move |i| self.x(i))
    }
}

/// Nodal values with `u(0) = u(1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    values: Vec<f64>,
}

impl Profile {
    /// Wraps nodal values; the end values must be exactly zero.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::InvalidProfile(format!(
                "need at least 5 nodes, got {}",
                values.len()
            )));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "end values must be 0, got {} and {}",
                values[0],
                values.last().unwrap()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!("non-finite value at node {i}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_nodes()],
        }
    }

    /// Samples `f` at the interior nodes; the end values are set to zero.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.n_cells();
        let values = (0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { f(grid.x(i)) })
            .collect();
        Self { values }
    }

    /// Tent with peak `height` at `x = peak`.
    pub fn tent(grid: &Grid, peak: f64, height: f64) -> Self {
        Self::from_fn(grid, |x| {
            if x <= peak {
                height * x / peak
            } else {
                height * (1.0 - x) / (1.0 - peak)
            }
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn grid(&self) -> Grid {
        Grid {
            n_cells: self.n_cells(),
        }
    }

    /// Discrete slopes `(u_{i+1} - u_i) / h`, one per edge.
    pub fn slopes(&self) -> Vec<f64> {
        let inv_h = self.n_cells() as f64;
        self.values.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Profile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Discrete `L²(0,1)` distance `sqrt(h Σ (u_i - v_i)^2)`.
    pub fn l2_distance(&self, other: &Profile) -> f64 {
        let h = 1.0 / self.n_cells() as f64;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (h * s).sqrt()
    }

    /// Total variation of the slope sequence.
    pub fn slope_total_variation(&self) -> f64 {
        self.slopes().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Mirror image `x ↦ 1 - x`.
    pub fn mirrored(&self) -> Profile {
        let mut v = self.values.clone();
        v.reverse();
        Profile { values: v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_basics() {
        let g = Grid::new(1024).unwrap();
        assert_eq!(g.x(0), 0.0);
        assert_eq!(g.x(1024), 1.0);
        assert_eq!(g.x(256), 0.25);
        assert!(Grid::new(3).is_err());
    }

    #[test]
    fn profile_dirichlet() {
        assert!(Profile::new(vec![0.0, 1.0, 2.0, 1.0, 0.0]).is_ok());
        assert!(Profile::new(vec![0.1, 1.0, 2.0, 1.0, 0.0]).is_err());
        assert!(Profile::new(vec![0.0, f64::NAN, 2.0, 1.0, 0.0]).is_err());
        let g = Grid::new(8).unwrap();
        let t = Profile::tent(&g, 0.5, 1.0);
        assert_eq!(t.values()[4], 1.0);
        assert_eq!(t.slopes()[0], 2.0);
        assert_eq!(t.slope_total_variation(), 4.0);
    }
}
