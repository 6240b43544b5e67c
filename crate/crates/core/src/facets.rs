//! Facet detection and the quantitative facet checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ForceField, PiecewiseConstant, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FacetKind {
    Min,
    Max,
    InflectionFlat,
    Boundary,
}

impl FacetKind {
    pub fn is_extremum(self) -> bool {
        matches!(self, FacetKind::Min | FacetKind::Max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Facet {
    pub left: f64,
    pub right: f64,
    pub level: f64,
    pub kind: FacetKind,
}

impl Facet {
    pub fn length(&self) -> f64 {
        self.right - self.left
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetSet {
    pub facets: Vec<Facet>,
    pub slope_tol: f64,
    pub min_length: f64,
}

impl FacetSet {
    /// Number of MIN and MAX facets.
    pub fn n_extremal(&self) -> usize {
        self.facets.iter().filter(|f| f.kind.is_extremum()).count()
    }

    /// Facets of the given kind whose interval lies inside `[a, b]`.
    pub fn within(&self, a: f64, b: f64) -> impl Iterator<Item = &Facet> {
        self.facets.iter().filter(move |f| f.left >= a && f.right <= b)
    }
}

/// A maximal run of flat edges `first..=last` (edge `e` joins nodes `e`, `e+1`).
#[derive(Debug, Clone, Copy)]
struct Run {
    first: usize,
    last: usize,
}

fn flat_runs(slopes: &[f64], slope_tol: f64) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut start = None;
    for (e, p) in slopes.iter().enumerate() {
        let flat = p.abs() <= slope_tol;
        match (flat, start) {
            (true, None) => start = Some(e),
            (false, Some(s)) => {
                runs.push(Run { first: s, last: e - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(Run {
            first: s,
            last: slopes.len() - 1,
        });
    }
    runs
}

fn classify(slopes: &[f64], first: usize, last: usize) -> FacetKind {
    if first == 0 || last + 1 == slopes.len() {
        return FacetKind::Boundary;
    }
    let before = slopes[first - 1];
    let after = slopes[last + 1];
    if before < 0.0 && after > 0.0 {
        FacetKind::Min
    } else if before > 0.0 && after < 0.0 {
        FacetKind::Max
    } else {
        FacetKind::InflectionFlat
    }
}

/// Maximal runs of edges with `|Du| <= slope_tol` spanning at least
/// `min_length`, classified by the slopes on either side.
pub fn detect_facets(u: &Profile, slope_tol: f64, min_length: f64) -> Result<FacetSet> {
    let h = 1.0 / u.n_cells() as f64;
    if !(slope_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("slope_tol must be > 0, got {slope_tol}")));
    }
    if !(min_length >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "min_length {min_length} is below two cells ({})",
            2.0 * h
        )));
    }
    let slopes = u.slopes();
    let grid = u.grid();
    let v = u.values();
    let facets = flat_runs(&slopes, slope_tol)
        .into_iter()
        .filter_map(|r| {
            let left = grid.x(r.first);
            let right = grid.x(r.last + 1);
            if right - left < min_length * (1.0 - 1e-12) {
                return None;
            }
            let level = v[r.first..=r.last + 1].iter().sum::<f64>() / (r.last - r.first + 2) as f64;
            Some(Facet {
                left,
                right,
                level,
                kind: classify(&slopes, r.first, r.last),
            })
        })
        .collect();
    Ok(FacetSet {
        facets,
        slope_tol,
        min_length,
    })
}

/// Default detection for evolved profiles: `slope_tol = h`, `min_length = 4h`.
pub fn detect_facets_default(u: &Profile) -> FacetSet {
    let h = 1.0 / u.n_cells() as f64;
    detect_facets(u, h, 4.0 * h).expect("defaults are valid")
}

/// A local extremum of a discrete profile, possibly a single node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub left: f64,
    pub right: f64,
    pub kind: FacetKind,
}

/// Interior local extrema: maximal flat runs (of any length, including single
/// nodes) entered and left with opposite slope signs.
pub fn local_extrema(u: &Profile, slope_tol: f64) -> Vec<Extremum> {
    let slopes = u.slopes();
    let grid = u.grid();
    let n = slopes.len();
    let mut out = Vec::new();
    let mut e = 0;
    while e < n {
        if slopes[e].abs() <= slope_tol {
            let first = e;
            while e < n && slopes[e].abs() <= slope_tol {
                e += 1;
            }
            let last = e - 1;
            let kind = classify(&slopes, first, last);
            if kind.is_extremum() {
                out.push(Extremum {
                    left: grid.x(first),
                    right: grid.x(last + 1),
                    kind,
                });
            }
        } else {
            // a node between two steep edges of opposite sign
            if e + 1 < n && slopes[e + 1].abs() > slope_tol {
                let (a, b) = (slopes[e], slopes[e + 1]);
                let kind = if a < 0.0 && b > 0.0 {
                    Some(FacetKind::Min)
                } else if a > 0.0 && b < 0.0 {
                    Some(FacetKind::Max)
                } else {
                    None
                };
                if let Some(kind) = kind {
                    let x = grid.x(e + 1);
                    out.push(Extremum { left: x, right: x, kind });
                }
            }
            e += 1;
        }
    }
    out
}

/// Outcome of the facet length lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CreationCheck {
    pub length: f64,
    /// `2 / (f_inf + ut_inf)`.
    pub bound: f64,
    /// `(2 / (f_inf + ut_l2))^2` when an `L²` norm of `u_t` is supplied.
    pub l2_bound: Option<f64>,
    /// `length - (bound - 2h)`.
    pub margin: f64,
    pub pass: bool,
}

/// Checks `right - left >= 2 / (f_inf + ut_inf) - 2h` for an extremal facet.
pub fn creation_bound_check(
    left: f64,
    right: f64,
    kind: FacetKind,
    f_inf: f64,
    ut_inf: f64,
    ut_l2: Option<f64>,
    h: f64,
) -> Result<CreationCheck> {
    if !kind.is_extremum() {
        return Err(Error::InvalidArgument(format!(
            "length bound applies to MIN/MAX facets, got {kind:?}"
        )));
    }
    let denom = f_inf + ut_inf;
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "f_inf + ut_inf must be > 0, got {denom}"
        )));
    }
    let length = right - left;
    let bound = 2.0 / denom;
    let margin = length - (bound - 2.0 * h);
    let l2_bound = ut_l2.map(|v| {
        let b = 2.0 / (f_inf + v);
        b * b
    });
    Ok(CreationCheck {
        length,
        bound,
        l2_bound,
        margin,
        pass: margin >= 0.0,
    })
}

/// `|∫_left^right F - expected_jump|`, exact from the piecewise-constant force.
pub fn facet_flux_balance(left: f64, right: f64, force: &PiecewiseConstant, expected_jump: f64) -> f64 {
    (force.integral(left, right) - expected_jump).abs()
}

/// Expected flux jump over an extremal facet under `(L(u_x))_x = F`.
pub fn expected_jump(kind: FacetKind) -> Option<f64> {
    match kind {
        FacetKind::Min => Some(2.0),
        FacetKind::Max => Some(-2.0),
        _ => None,
    }
}

/// Primitive range width of `force` on `[0, 1]` and whether it fits into a
/// band of width 2 (the zero state is then stationary).
pub fn band_check(force: &PiecewiseConstant) -> (f64, bool) {
    let (lo, hi) = force.primitive_range();
    let w = hi - lo;
    (w, w <= 2.0)
}

/// The three conditions under which a steady facet `[ξ-, ξ+]` persists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StagnationConditions {
    pub time: f64,
    /// `supp(f(t) - f(0)) ⊂ [ξ-, ξ+]`.
    pub support: bool,
    /// `∫_{ξ-}^{ξ+} f(t) - 2`.
    pub mean_defect: f64,
    pub mean: bool,
    /// `sup |∫_a^b f(t)|` over `ξ- < a < b < ξ+`.
    pub sub_sup: f64,
    /// Whether the supremum is attained by an admissible pair.
    pub sub_attained: bool,
    pub sub: bool,
}

impl StagnationConditions {
    pub fn all(&self) -> bool {
        self.support && self.mean && self.sub
    }
}

/// Evaluates the stagnation conditions exactly from the term list at each
/// time in `times`, for a force in the convention `(L(u_x))_x = F`.
pub fn stagnation_conditions_check(
    force: &ForceField,
    xi_minus: f64,
    xi_plus: f64,
    times: &[f64],
) -> Result<Vec<StagnationConditions>> {
    if !(0.0 < xi_minus && xi_minus < xi_plus && xi_plus < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < xi_minus < xi_plus < 1, got [{xi_minus}, {xi_plus}]"
        )));
    }
    let f0 = force.slice(0.0);
    let tol = 1e-12;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let ft = force.slice(t);
        let diff = ft.combine(1.0, &f0, -1.0);
        let support = diff
            .breaks()
            .windows(2)
            .zip(diff.values())
            .all(|(w, &v)| v == 0.0 || (w[0] >= xi_minus && w[1] <= xi_plus));
        let mean_defect = ft.integral(xi_minus, xi_plus) - 2.0;
        let (sub_sup, sub_attained) = sub_interval_sup(&ft, xi_minus, xi_plus);
        let sub = if sub_attained {
            sub_sup < 2.0 - tol
        } else {
            sub_sup <= 2.0 + tol
        };
        out.push(StagnationConditions {
            time: t,
            support,
            mean_defect,
            mean: mean_defect.abs() <= tol,
            sub_sup,
            sub_attained,
            sub,
        });
    }
    Ok(out)
}

/// `sup |∫_a^b f|` over `ξ- < a < b < ξ+`, and whether it is attained.
///
/// The primitive is piecewise linear with nodes at the breakpoints; the
/// supremum of `|P(b) - P(a)|` is taken at a pair of nodes. It is attained on
/// the open range iff a maximizing pair can be moved inside without loss,
/// which requires a flat piece next to any pair element sitting at `ξ±`.
fn sub_interval_sup(f: &PiecewiseConstant, xm: f64, xp: f64) -> (f64, bool) {
    let mut nodes = vec![xm];
    nodes.extend(f.breaks().iter().copied().filter(|&b| b > xm && b < xp));
    nodes.push(xp);
    let prim: Vec<f64> = nodes.iter().map(|&x| f.primitive(x)).collect();
    let k = nodes.len();
    let first_flat = f.eval(xm) == 0.0;
    let last_flat = f.eval(0.5 * (nodes[k - 2] + xp)) == 0.0;
    let mut best = 0.0_f64;
    let mut attained = false;
    for i in 0..k {
        for j in i + 1..k {
            let v = (prim[j] - prim[i]).abs();
            let ok = (i > 0 || first_flat) && (j < k - 1 || last_flat);
            if v > best + 1e-15 {
                best = v;
                attained = ok;
            } else if (v - best).abs() <= 1e-15 {
                attained |= ok;
            }
        }
    }
    (best, attained)
}
