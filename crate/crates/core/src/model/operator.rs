//! Monotone flux graphs `L(p) = sgn p + L_r(p)`.
//!
//! The sign part contributes the jump interval `[-1, 1]` at `p = 0`; the
//! regular part `L_r` is either absent, the identity, or a nondecreasing
//! piecewise polynomial.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which member of the operator family is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `L_0(p) = sgn p`.
    TvOnly,
    /// `L_1(p) = p + sgn p`.
    TvPlusLinear,
    /// `L_2(p) = sgn p + L_r(p)` with a tabulated regular part.
    TvPlusRegular,
}

/// Closed interval of admissible flux values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FluxInterval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, s: f64) -> bool {
        self.lo <= s && s <= self.hi
    }

    /// Distance from `s` to the interval (zero inside).
    pub fn distance(&self, s: f64) -> f64 {
        if s < self.lo {
            self.lo - s
        } else if s > self.hi {
            s - self.hi
        } else {
            0.0
        }
    }
}

/// Piecewise polynomial on `[knots[0], knots[k]]`, extended affinely
/// beyond the table ends with the end slopes.
///
/// Each piece stores coefficients of `p^0, p^1, ...` in the global variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTable {
    pub knots: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

fn poly_eval(c: &[f64], p: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * p + ck)
}

fn poly_deriv(c: &[f64], p: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * p + k as f64 * ck)
}

fn poly_antideriv(c: &[f64], p: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * p + ck / (k as f64 + 1.0))
        * p
}

const MONOTONE_SAMPLES: usize = 64;

impl PolyTable {
    pub fn new(knots: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let mut table = Self {
            knots,
            coeffs,
            cumulative: Vec::new(),
        };
        table.finalize()?;
        Ok(table)
    }

    /// Validates the table and precomputes cumulative integrals. Needed after
    /// deserialization.
    pub fn finalize(&mut self) -> Result<()> {
        let k = self.coeffs.len();
        if k == 0 || self.knots.len() != k + 1 {
            return Err(Error::InvalidOperator(format!(
                "regular part needs k pieces and k+1 knots (got {} pieces, {} knots)",
                k,
                self.knots.len()
            )));
        }
        if self.knots.iter().any(|v| !v.is_finite())
            || self.coeffs.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidOperator("non-finite entry in regular part".into()));
        }
        if self.coeffs.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidOperator("empty polynomial piece".into()));
        }
        if self.knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidOperator("knots must be strictly increasing".into()));
        }
        for j in 1..k {
            let x = self.knots[j];
            let left = poly_eval(&self.coeffs[j - 1], x);
            let right = poly_eval(&self.coeffs[j], x);
            if (left - right).abs() > 1e-10 * (1.0 + left.abs()) {
                return Err(Error::InvalidOperator(format!(
                    "regular part is discontinuous at knot {x}: {left} vs {right}"
                )));
            }
        }
        for (j, c) in self.coeffs.iter().enumerate() {
            let (a, b) = (self.knots[j], self.knots[j + 1]);
            for s in 0..=MONOTONE_SAMPLES {
                let p = a + (b - a) * s as f64 / MONOTONE_SAMPLES as f64;
                if poly_deriv(c, p) < -1e-12 {
                    return Err(Error::InvalidOperator(format!(
                        "regular part decreases near p = {p}"
                    )));
                }
            }
        }
        let mut cumulative = vec![0.0; k + 1];
        for j in 0..k {
            let c = &self.coeffs[j];
            cumulative[j + 1] = cumulative[j]
                + poly_antideriv(c, self.knots[j + 1])
                - poly_antideriv(c, self.knots[j]);
        }
        self.cumulative = cumulative;
        Ok(())
    }

    fn first(&self) -> f64 {
        self.knots[0]
    }

    fn last(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    fn piece(&self, p: f64) -> usize {
        let k = self.coeffs.len();
        match self.knots[1..k].iter().position(|&x| p < x) {
            Some(j) => j,
            None => k - 1,
        }
    }

    fn end_slopes(&self) -> (f64, f64) {
        let k = self.coeffs.len();
        (
            poly_deriv(&self.coeffs[0], self.first()),
            poly_deriv(&self.coeffs[k - 1], self.last()),
        )
    }

    pub fn value(&self, p: f64) -> f64 {
        let (sl, sr) = self.end_slopes();
        if p < self.first() {
            poly_eval(&self.coeffs[0], self.first()) + sl * (p - self.first())
        } else if p > self.last() {
            poly_eval(self.coeffs.last().unwrap(), self.last()) + sr * (p - self.last())
        } else {
            poly_eval(&self.coeffs[self.piece(p)], p)
        }
    }

    pub fn slope(&self, p: f64) -> f64 {
        let (sl, sr) = self.end_slopes();
        if p < self.first() {
            sl
        } else if p > self.last() {
            sr
        } else {
            poly_deriv(&self.coeffs[self.piece(p)], p)
        }
    }

    /// Integral of the table from `knots[0]` to `p`.
    fn integral_from_first(&self, p: f64) -> f64 {
        let (sl, sr) = self.end_slopes();
        if p < self.first() {
            let v0 = poly_eval(&self.coeffs[0], self.first());
            let d = p - self.first();
            v0 * d + 0.5 * sl * d * d
        } else if p > self.last() {
            let k = self.coeffs.len();
            let v1 = poly_eval(&self.coeffs[k - 1], self.last());
            let d = p - self.last();
            self.cumulative[k] + v1 * d + 0.5 * sr * d * d
        } else {
            let j = self.piece(p);
            let c = &self.coeffs[j];
            self.cumulative[j] + poly_antideriv(c, p) - poly_antideriv(c, self.knots[j])
        }
    }

    /// `R(p) = ∫_0^p L_r`.
    pub fn primitive(&self, p: f64) -> f64 {
        self.integral_from_first(p) - self.integral_from_first(0.0)
    }

    /// Smallest derivative over the sampled table and its affine extensions.
    pub fn min_slope(&self) -> f64 {
        let (sl, sr) = self.end_slopes();
        let mut m = sl.min(sr);
        for (j, c) in self.coeffs.iter().enumerate() {
            let (a, b) = (self.knots[j], self.knots[j + 1]);
            for s in 0..=MONOTONE_SAMPLES {
                let p = a + (b - a) * s as f64 / MONOTONE_SAMPLES as f64;
                m = m.min(poly_deriv(c, p));
            }
        }
        m
    }

    /// Solves `L_r(p) = v` for a strictly increasing table.
    pub fn inverse(&self, v: f64) -> f64 {
        let (sl, sr) = self.end_slopes();
        let v_first = self.value(self.first());
        let v_last = self.value(self.last());
        if v <= v_first {
            return self.first() + (v - v_first) / sl;
        }
        if v >= v_last {
            return self.last() + (v - v_last) / sr;
        }
        let k = self.coeffs.len();
        let mut j = 0;
        while j + 1 < k && poly_eval(&self.coeffs[j], self.knots[j + 1]) < v {
            j += 1;
        }
        let c = &self.coeffs[j];
        let (mut lo, mut hi) = (self.knots[j], self.knots[j + 1]);
        let mut p = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = poly_eval(c, p) - v;
            if r == 0.0 {
                return p;
            }
            if r < 0.0 {
                lo = p;
            } else {
                hi = p;
            }
            let d = poly_deriv(c, p);
            let newton = p - r / d;
            p = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * p.abs().max(1e-300) {
                break;
            }
        }
        p
    }
}

/// The monotone graph `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    kind: OperatorKind,
    table: Option<PolyTable>,
}

impl OperatorSpec {
    /// `L_0(p) = sgn p`.
    pub fn tv_only() -> Self {
        Self {
            kind: OperatorKind::TvOnly,
            table: None,
        }
    }

    /// `L_1(p) = p + sgn p`.
    pub fn tv_plus_linear() -> Self {
        Self {
            kind: OperatorKind::TvPlusLinear,
            table: None,
        }
    }

    /// `L_2(p) = sgn p + L_r(p)` with `L_r` given by a nondecreasing table.
    pub fn tv_plus_regular(table: PolyTable) -> Self {
        Self {
            kind: OperatorKind::TvPlusRegular,
            table: Some(table),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn table(&self) -> Option<&PolyTable> {
        self.table.as_ref()
    }

    /// `L_r(p)`.
    pub fn regular(&self, p: f64) -> f64 {
        match (&self.kind, &self.table) {
            (OperatorKind::TvOnly, _) => 0.0,
            (OperatorKind::TvPlusLinear, _) => p,
            (OperatorKind::TvPlusRegular, Some(t)) => t.value(p),
            (OperatorKind::TvPlusRegular, None) => unreachable!("regular operator without table"),
        }
    }

    /// `L_r'(p)`.
    pub fn regular_slope(&self, p: f64) -> f64 {
        match (&self.kind, &self.table) {
            (OperatorKind::TvOnly, _) => 0.0,
            (OperatorKind::TvPlusLinear, _) => 1.0,
            (OperatorKind::TvPlusRegular, Some(t)) => t.slope(p),
            (OperatorKind::TvPlusRegular, None) => unreachable!("regular operator without table"),
        }
    }

    /// Centre of the jump interval, `L_r(0)`.
    pub fn jump_center(&self) -> f64 {
        self.regular(0.0)
    }

    /// The admissible flux values at slope `p`.
    pub fn eval(&self, p: f64) -> FluxInterval {
        let r = self.regular(p);
        if p > 0.0 {
            FluxInterval::point(r + 1.0)
        } else if p < 0.0 {
            FluxInterval::point(r - 1.0)
        } else {
            FluxInterval {
                lo: r - 1.0,
                hi: r + 1.0,
            }
        }
    }

    /// Hull of `L` over the slope interval `[p - eta, p + eta]`.
    pub fn eval_hull(&self, p: f64, eta: f64) -> FluxInterval {
        FluxInterval {
            lo: self.eval(p - eta).lo,
            hi: self.eval(p + eta).hi,
        }
    }

    /// Energy density `W(p) = |p| + ∫_0^p L_r`, the primitive of `L`.
    pub fn energy(&self, p: f64) -> f64 {
        p.abs()
            + match (&self.kind, &self.table) {
                (OperatorKind::TvOnly, _) => 0.0,
                (OperatorKind::TvPlusLinear, _) => 0.5 * p * p,
                (OperatorKind::TvPlusRegular, Some(t)) => t.primitive(p),
                (OperatorKind::TvPlusRegular, None) => unreachable!(),
            }
    }

    /// True when `L_r' >= d > 0` everywhere, so that the inverse graph is a
    /// single-valued Lipschitz function.
    pub fn has_strict_regular_part(&self) -> bool {
        match (&self.kind, &self.table) {
            (OperatorKind::TvOnly, _) => false,
            (OperatorKind::TvPlusLinear, _) => true,
            (OperatorKind::TvPlusRegular, Some(t)) => t.min_slope() > 0.0,
            (OperatorKind::TvPlusRegular, None) => false,
        }
    }

    /// Inverse graph `L^{-1}(s)` when it is single valued.
    ///
    /// Returns `None` for set-valued or empty preimages (only possible for a
    /// regular part that is not strictly increasing, e.g. `L_0` at `|s| >= 1`).
    pub fn slope_for_flux(&self, s: f64) -> Option<f64> {
        let c = self.jump_center();
        if (s - c).abs() < 1.0 {
            return Some(0.0);
        }
        if !self.has_strict_regular_part() {
            return None;
        }
        Some(self.inverse_strict(s))
    }

    /// `L^{-1}(s)` for strictly increasing regular parts.
    pub(crate) fn inverse_strict(&self, s: f64) -> f64 {
        let c = self.jump_center();
        if s > c + 1.0 {
            self.invert_regular(s - 1.0).max(0.0)
        } else if s < c - 1.0 {
            self.invert_regular(s + 1.0).min(0.0)
        } else {
            0.0
        }
    }

    /// Derivative of `L^{-1}` at `s` (zero inside the jump band).
    pub(crate) fn inverse_slope_strict(&self, s: f64) -> f64 {
        let c = self.jump_center();
        if (s - c).abs() <= 1.0 {
            return 0.0;
        }
        match self.kind {
            OperatorKind::TvPlusLinear => 1.0,
            _ => {
                let p = self.inverse_strict(s);
                1.0 / self.regular_slope(p)
            }
        }
    }

    fn invert_regular(&self, v: f64) -> f64 {
        match (&self.kind, &self.table) {
            (OperatorKind::TvPlusLinear, _) => v,
            (OperatorKind::TvPlusRegular, Some(t)) => t.inverse(v),
            _ => unreachable!("inverse of a non-strict regular part"),
        }
    }

    /// Convex conjugate `W*(s)` of the energy density.
    pub fn conjugate(&self, s: f64) -> f64 {
        match self.kind {
            OperatorKind::TvOnly => {
                if s.abs() <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            OperatorKind::TvPlusLinear => {
                let e = (s.abs() - 1.0).max(0.0);
                0.5 * e * e
            }
            OperatorKind::TvPlusRegular => {
                if !self.has_strict_regular_part() {
                    // Legendre transform through the sampled graph is not
                    // available; the solvers never ask for it in this case.
                    return f64::NAN;
                }
                let p = self.inverse_strict(s);
                s * p - self.energy(p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> OperatorSpec {
        // L_r(p) = p + p^3 on [-2, 2], affine outside.
        let c = vec![0.0, 1.0, 0.0, 1.0];
        OperatorSpec::tv_plus_regular(PolyTable::new(vec![-2.0, 0.0, 2.0], vec![c.clone(), c]).unwrap())
    }

    #[test]
    fn linear_operator_values() {
        let op = OperatorSpec::tv_plus_linear();
        assert_eq!(op.eval(2.0), FluxInterval::point(3.0));
        assert_eq!(op.eval(0.0), FluxInterval { lo: -1.0, hi: 1.0 });
        assert_eq!(op.eval(-0.25), FluxInterval::point(-1.25));
    }

    #[test]
    fn tv_only_values() {
        let op = OperatorSpec::tv_only();
        assert_eq!(op.eval(-0.5), FluxInterval::point(-1.0));
        assert_eq!(op.eval(0.0), FluxInterval { lo: -1.0, hi: 1.0 });
        assert_eq!(op.slope_for_flux(0.3), Some(0.0));
        assert_eq!(op.slope_for_flux(1.0), None);
        assert!(op.conjugate(1.5).is_infinite());
    }

    #[test]
    fn regular_table_inverse_and_primitive() {
        let op = cubic();
        for &p in &[-3.0, -1.5, -0.2, 0.0, 0.7, 1.9, 4.0] {
            let s = op.eval(p);
            if p != 0.0 {
                let back = op.slope_for_flux(s.lo).unwrap();
                assert!((back - p).abs() < 1e-12, "{p} -> {back}");
            }
        }
        let t = op.table().unwrap();
        // ∫_0^1 p + p^3 = 3/4
        assert!((t.primitive(1.0) - 0.75).abs() < 1e-14);
        assert!((t.primitive(-1.0) - 0.75).abs() < 1e-14);
        // affine extension: L_r(3) = 10 + 13 * 1
        assert!((t.value(3.0) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_matches_legendre_for_linear() {
        let op = OperatorSpec::tv_plus_linear();
        for &s in &[-3.0, -1.0, 0.0, 0.4, 2.5] {
            let p = op.slope_for_flux(s).unwrap();
            let legendre = s * p - op.energy(p);
            assert!((legendre - op.conjugate(s)).abs() < 1e-14);
        }
    }

    #[test]
    fn table_validation() {
        assert!(PolyTable::new(vec![0.0, 1.0], vec![vec![0.0, -1.0]]).is_err());
        assert!(PolyTable::new(vec![0.0, 1.0, 2.0], vec![vec![0.0, 1.0], vec![5.0, 1.0]]).is_err());
        assert!(PolyTable::new(vec![1.0, 0.0], vec![vec![0.0, 1.0]]).is_err());
        // flat piece is allowed but not strict
        let flat = OperatorSpec::tv_plus_regular(
            PolyTable::new(vec![-1.0, 1.0], vec![vec![0.0]]).unwrap(),
        );
        assert!(!flat.has_strict_regular_part());
    }
}
