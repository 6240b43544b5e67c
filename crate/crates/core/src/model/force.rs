//! Piecewise-constant forces with a clipped-ramp time law.

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// One `amplitude * χ_[start, end]` contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceTerm {
    pub start: f64,
    pub end: f64,
    pub amplitude: f64,
}

impl ForceTerm {
    pub fn new(start: f64, end: f64, amplitude: f64) -> Self {
        Self {
            start,
            end,
            amplitude,
        }
    }

    fn validate(&self, group: &'static str, index: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidForceTerm {
            group,
            index,
            reason,
        };
        if !(self.start.is_finite() && self.end.is_finite() && self.amplitude.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        if self.start < 0.0 || self.end > 1.0 {
            return Err(bad(format!(
                "interval [{}, {}] leaves [0, 1]",
                self.start, self.end
            )));
        }
        if self.start >= self.end {
            return Err(bad(format!(
                "interval [{}, {}] is empty or reversed",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Time modulation applied to the ramp terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TimeLaw {
    /// Ramp terms enter with weight 1 at all times.
    Constant,
    /// Ramp terms enter with weight `min{t, cap}`.
    ClippedRamp { cap: f64 },
}

impl TimeLaw {
    pub fn weight(&self, t: f64) -> f64 {
        match *self {
            TimeLaw::Constant => 1.0,
            TimeLaw::ClippedRamp { cap } => t.max(0.0).min(cap),
        }
    }

    /// `∫_0^T |d/dt weight| dt`.
    pub fn total_variation(&self, t_final: f64) -> f64 {
        match *self {
            TimeLaw::Constant => 0.0,
            TimeLaw::ClippedRamp { cap } => t_final.max(0.0).min(cap),
        }
    }
}

/// How a piecewise-constant force is turned into nodal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Value at the node (the midpoint of its control volume), right-continuous.
    Midpoint,
    /// Exact average over the control volume `[x_i - h/2, x_i + h/2]`.
    #[default]
    CellAverage,
}

/// A function on `[0, 1]` that is constant between sorted breakpoints.
///
/// Pieces are right-continuous: piece `k` covers `[breaks[k], breaks[k+1])`,
/// and the last piece also contains `x = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

fn merged_breaks<'a>(terms: impl Iterator<Item = &'a ForceTerm>) -> Vec<f64> {
    let mut b = vec![0.0, 1.0];
    for t in terms {
        b.push(t.start);
        b.push(t.end);
    }
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup();
    b
}

impl PiecewiseConstant {
    pub fn constant(v: f64) -> Self {
        Self {
            breaks: vec![0.0, 1.0],
            values: vec![v],
        }
    }

    /// Builds the sum of indicator terms over the given breakpoint set.
    fn from_terms_on(breaks: &[f64], terms: &[ForceTerm]) -> Self {
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                terms
                    .iter()
                    .filter(|t| t.start <= mid && mid < t.end)
                    .map(|t| t.amplitude)
                    .sum()
            })
            .collect();
        Self {
            breaks: breaks.to_vec(),
            values,
        }
    }

    pub fn from_terms(terms: &[ForceTerm]) -> Self {
        Self::from_terms_on(&merged_breaks(terms.iter()), terms)
    }

    /// Builds from explicit breakpoints (including 0 and 1) and piece values.
    pub fn from_pieces(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidForce("breaks/values length mismatch".into()));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::InvalidForce("breaks must start at 0 and end at 1".into()));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidForce("breaks must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidForce("non-finite piece value".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn piece_index(&self, x: f64) -> usize {
        let k = self.values.len();
        // first break strictly greater than x, minus one
        let pos = self.breaks[1..k].partition_point(|&b| b <= x);
        pos.min(k - 1)
    }

    /// Right-continuous evaluation; `x = 1` takes the last piece.
    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.piece_index(x)]
    }

    /// Exact `∫_0^x`.
    pub fn primitive(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let (a, b) = (self.breaks[k], self.breaks[k + 1]);
            if x <= a {
                break;
            }
            acc += v * (b.min(x) - a);
        }
        acc
    }

    /// Exact `∫_a^b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.primitive(b) - self.primitive(a)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(min, max)` of the primitive `x ↦ ∫_0^x` over `[0, 1]`.
    pub fn primitive_range(&self) -> (f64, f64) {
        let mut acc = 0.0;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for (k, &v) in self.values.iter().enumerate() {
            acc += v * (self.breaks[k + 1] - self.breaks[k]);
            lo = lo.min(acc);
            hi = hi.max(acc);
        }
        (lo, hi)
    }

    /// Pointwise linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mut breaks = self.breaks.clone();
        breaks.extend_from_slice(&other.breaks);
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        breaks.dedup();
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                a * self.eval(mid) + b * other.eval(mid)
            })
            .collect();
        Self { breaks, values }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// Nodal samples `F_i`, `i = 0..=n`.
    pub fn sample(&self, grid: &Grid, sampling: Sampling) -> Vec<f64> {
        let n = grid.n_cells();
        let h = grid.h();
        (0..=n)
            .map(|i| {
                let x = grid.x(i);
                match sampling {
                    Sampling::Midpoint => self.eval(x),
                    Sampling::CellAverage => {
                        let a = (x - 0.5 * h).max(0.0);
                        let b = (x + 0.5 * h).min(1.0);
                        self.integral(a, b) / (b - a)
                    }
                }
            })
            .collect()
    }
}

/// `sign * (Σ base + law(t) * Σ ramp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    base_terms: Vec<ForceTerm>,
    ramp_terms: Vec<ForceTerm>,
    time_law: TimeLaw,
    sign: f64,
    base: PiecewiseConstant,
    ramp: PiecewiseConstant,
}

impl ForceField {
    pub fn new(
        base_terms: Vec<ForceTerm>,
        ramp_terms: Vec<ForceTerm>,
        time_law: TimeLaw,
        sign: f64,
    ) -> Result<Self> {
        for (i, t) in base_terms.iter().enumerate() {
            t.validate("base", i)?;
        }
        for (i, t) in ramp_terms.iter().enumerate() {
            t.validate("ramp", i)?;
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidForce(format!("global sign must be +1 or -1, got {sign}")));
        }
        if let TimeLaw::ClippedRamp { cap } = time_law {
            if !(cap.is_finite() && cap >= 0.0) {
                return Err(Error::InvalidForce(format!("ramp cap must be finite and >= 0, got {cap}")));
            }
        }
        let breaks = merged_breaks(base_terms.iter().chain(ramp_terms.iter()));
        let base = PiecewiseConstant::from_terms_on(&breaks, &base_terms);
        let ramp = PiecewiseConstant::from_terms_on(&breaks, &ramp_terms);
        Ok(Self {
            base_terms,
            ramp_terms,
            time_law,
            sign,
            base,
            ramp,
        })
    }

    /// Time-independent force equal to `value` on all of `[0, 1]`.
    pub fn constant(value: f64) -> Self {
        Self::new(vec![ForceTerm::new(0.0, 1.0, value)], vec![], TimeLaw::Constant, 1.0)
            .expect("constant force is valid")
    }

    /// The facet-breaking pattern `-2χ_[3/8,5/8] + χ_[1/4,3/4]`.
    pub fn breaking_pattern() -> Vec<ForceTerm> {
        vec![
            ForceTerm::new(0.25, 0.75, 1.0),
            ForceTerm::new(0.375, 0.625, -2.0),
        ]
    }

    /// `sign * (4 + min{t, cap} (-2χ_[3/8,5/8] + χ_[1/4,3/4]))`.
    pub fn breaking_family(cap: f64, sign: f64) -> Result<Self> {
        Self::new(
            vec![ForceTerm::new(0.0, 1.0, 4.0)],
            Self::breaking_pattern(),
            TimeLaw::ClippedRamp { cap },
            sign,
        )
    }

    /// Static slice `f_α(x) = 4 + α(-2χ_[3/8,5/8] + χ_[1/4,3/4])`.
    pub fn alpha_slice(alpha: f64) -> PiecewiseConstant {
        let f = Self::breaking_family(alpha, 1.0).expect("valid family");
        f.slice(alpha)
    }

    pub fn base_terms(&self) -> &[ForceTerm] {
        &self.base_terms
    }

    pub fn ramp_terms(&self) -> &[ForceTerm] {
        &self.ramp_terms
    }

    pub fn time_law(&self) -> TimeLaw {
        self.time_law
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// The same field with the global sign flipped.
    pub fn negated(&self) -> Self {
        let mut f = self.clone();
        f.sign = -f.sign;
        f
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.sign * (self.base.eval(x) + self.time_law.weight(t) * self.ramp.eval(x))
    }

    /// The spatial force at time `t`.
    pub fn slice(&self, t: f64) -> PiecewiseConstant {
        let w = self.time_law.weight(t);
        PiecewiseConstant {
            breaks: self.base.breaks.clone(),
            values: self
                .base
                .values
                .iter()
                .zip(&self.ramp.values)
                .map(|(b, r)| self.sign * (b + w * r))
                .collect(),
        }
    }

    pub fn sup_abs(&self, t: f64) -> f64 {
        self.slice(t).sup_abs()
    }

    /// `∫_0^T ||f_t||_∞ dt`, exact from the term list.
    pub fn time_derivative_integral(&self, t_final: f64) -> f64 {
        self.ramp.sup_abs() * self.time_law.total_variation(t_final)
    }

    /// Times at which the time law changes slope within `[0, t_final]`.
    pub fn time_breakpoints(&self, t_final: f64) -> Vec<f64> {
        let mut ts = vec![0.0, t_final];
        if let TimeLaw::ClippedRamp { cap } = self.time_law {
            if cap < t_final {
                ts.push(cap);
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }

    /// Nodal samples of the base and ramp parts (without sign); the slice at
    /// time `t` is `sign * (base + law(t) * ramp)` node by node.
    pub fn sample_parts(&self, grid: &Grid, sampling: Sampling) -> (Vec<f64>, Vec<f64>) {
        (
            self.base.sample(grid, sampling),
            self.ramp.sample(grid, sampling),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breaking_family_values() {
        let f = ForceField::breaking_family(16.0, 1.0).unwrap();
        assert_eq!(f.eval(0.5, 20.0), -12.0);
        assert_eq!(f.eval(0.3, 20.0), 20.0);
        assert_eq!(f.eval(0.1, 20.0), 4.0);
        // ramp vanishes at t = 0
        for &x in &[0.0, 0.3, 0.5, 0.7, 1.0] {
            assert_eq!(f.eval(x, 0.0), 4.0);
        }
        let neg = ForceField::breaking_family(16.0, -1.0).unwrap();
        assert_eq!(neg.eval(0.5, 20.0), 12.0);
    }

    #[test]
    fn constant_force_everywhere() {
        let f = ForceField::constant(4.0);
        for &(x, t) in &[(0.0, 0.0), (0.25, 3.0), (1.0, 100.0)] {
            assert_eq!(f.eval(x, t), 4.0);
        }
    }

    #[test]
    fn right_continuous_endpoints() {
        let f = ForceField::alpha_slice(16.0);
        assert_eq!(f.eval(0.25), 20.0);
        assert_eq!(f.eval(0.375), -12.0);
        assert_eq!(f.eval(0.625), 20.0);
        assert_eq!(f.eval(0.75), 4.0);
        assert_eq!(f.eval(1.0), 4.0);
    }

    #[test]
    fn exact_integrals() {
        let f = ForceField::alpha_slice(16.0);
        assert_eq!(f.integral(0.25, 0.35), 20.0 * (0.35 - 0.25));
        assert_eq!(f.integral(0.0, 1.0), 4.0);
        // ramp pattern integrates to zero
        let p = PiecewiseConstant::from_terms(&ForceField::breaking_pattern());
        assert_eq!(p.integral(0.0, 1.0), 0.0);
        assert_eq!(p.sup_abs(), 1.0);
    }

    #[test]
    fn rejects_reversed_interval() {
        let err = ForceField::new(vec![ForceTerm::new(0.9, 0.3, 1.0)], vec![], TimeLaw::Constant, 1.0)
            .unwrap_err();
        assert!(err.to_string().contains("reversed"), "{err}");
    }

    #[test]
    fn cell_average_preserves_integrals() {
        let g = Grid::new(64).unwrap();
        let f = ForceField::alpha_slice(13.0);
        let s = f.sample(&g, Sampling::CellAverage);
        let h = g.h();
        let discrete: f64 = s[1..64].iter().sum::<f64>() * h;
        let exact = f.integral(0.5 * h, 1.0 - 0.5 * h);
        assert!((discrete - exact).abs() < 1e-13);
    }

    #[test]
    fn time_derivative_integral_of_breaking_family() {
        let f = ForceField::breaking_family(16.0, -1.0).unwrap();
        assert_eq!(f.time_derivative_integral(36.0), 16.0);
        assert_eq!(f.time_derivative_integral(5.0), 5.0);
    }
}
