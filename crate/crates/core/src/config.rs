//! TOML run configuration.
//!
//! ```toml
//! [operator]
//! kind = "tv_plus_linear"          # tv_only | tv_plus_linear | tv_plus_regular
//! # regular = { knots = [-1, 0, 1], coeffs = [[0, 1], [0, 1]] }
//!
//! [force]
//! base = [{ start = 0.0, end = 1.0, amplitude = 4.0 }]
//! ramp = [{ start = 0.25, end = 0.75, amplitude = 1.0 }]
//! time_law = "clipped_ramp"         # constant | clipped_ramp
//! cap = 10.0
//! sign = -1.0
//! sampling = "cell_average"         # cell_average | midpoint
//!
//! [grid]
//! n_cells = 1024
//!
//! [time]
//! tau = 1e-3
//! t_final = 20.0
//! snapshots = [1.0, 2.0]            # or snapshot_every = 1.0
//!
//! [solver]
//! tol = 1e-10
//!
//! [initial]
//! kind = "steady"                   # zero | steady | tent | file
//! amplitude = 4.0                   # steady: constant force F
//!
//! [experiment]
//! alpha = 16.0
//! alphas = [8.0, 10.0, 11.0, 13.0, 16.0, 24.0]
//! ```
//!
//! Every table and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForceField, ForceTerm, Grid, OperatorKind, OperatorSpec, PolyTable, Profile, Sampling, TimeLaw};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub force: ForceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular: Option<PolyTable>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            kind: OperatorKind::TvPlusLinear,
            regular: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeLawKind {
    #[default]
    Constant,
    ClippedRamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    #[serde(default)]
    pub base: Vec<ForceTerm>,
    #[serde(default)]
    pub ramp: Vec<ForceTerm>,
    #[serde(default)]
    pub time_law: TimeLawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default = "one")]
    pub sign: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

fn one() -> f64 {
    1.0
}

impl Default for ForceConfig {
    fn default() -> Self {
        Self {
            base: Vec::new(),
            ramp: Vec::new(),
            time_law: TimeLawKind::Constant,
            cap: None,
            sign: 1.0,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_cells: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            t_final: None,
            snapshots: Vec::new(),
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Zero,
    /// Steady state of the constant force `amplitude`.
    Steady,
    /// Tent with apex `(peak, height)`.
    Tent,
    /// Two-column profile file.
    File,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub kind: InitialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
    /// Time added after the ramp stops (`T = α + settle`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle: Option<f64>,
    /// Allowed offset of the threshold estimate from 12.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn operator(&self) -> Result<OperatorSpec> {
        match (self.operator.kind, &self.operator.regular) {
            (OperatorKind::TvOnly, None) => Ok(OperatorSpec::tv_only()),
            (OperatorKind::TvPlusLinear, None) => Ok(OperatorSpec::tv_plus_linear()),
            (OperatorKind::TvPlusRegular, Some(t)) => {
                let mut t = t.clone();
                t.finalize()?;
                Ok(OperatorSpec::tv_plus_regular(t))
            }
            (OperatorKind::TvPlusRegular, None) => Err(Error::Config(
                "operator.regular is required for kind = \"tv_plus_regular\"".into(),
            )),
            (kind, Some(_)) => Err(Error::Config(format!(
                "operator.regular is only allowed with kind = \"tv_plus_regular\", not {kind:?}"
            ))),
        }
    }

    pub fn time_law(&self) -> Result<TimeLaw> {
        match (self.force.time_law, self.force.cap) {
            (TimeLawKind::Constant, None) => Ok(TimeLaw::Constant),
            (TimeLawKind::Constant, Some(_)) => Err(Error::Config(
                "force.cap requires force.time_law = \"clipped_ramp\"".into(),
            )),
            (TimeLawKind::ClippedRamp, Some(cap)) => Ok(TimeLaw::ClippedRamp { cap }),
            (TimeLawKind::ClippedRamp, None) => {
                Err(Error::Config("force.time_law = \"clipped_ramp\" needs force.cap".into()))
            }
        }
    }

    pub fn force(&self) -> Result<ForceField> {
        ForceField::new(
            self.force.base.clone(),
            self.force.ramp.clone(),
            self.time_law()?,
            self.force.sign,
        )
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n_cells)
    }

    pub fn tau(&self) -> Result<f64> {
        let tau = self.time.tau;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("time.tau must be > 0, got {tau}")));
        }
        Ok(tau)
    }

    pub fn t_final(&self) -> Result<f64> {
        self.time
            .t_final
            .ok_or_else(|| Error::Config("time.t_final is required".into()))
    }

    /// Explicit snapshot list, or a uniform one from `snapshot_every`.
    pub fn snapshot_times(&self, t_final: f64) -> Vec<f64> {
        let mut ts = self.time.snapshots.clone();
        if let Some(dt) = self.time.snapshot_every {
            if dt > 0.0 {
                let k = (t_final / dt + 1e-9).floor() as usize;
                ts.extend((1..=k).map(|j| j as f64 * dt));
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }

    /// The initial profile on `grid`. `steady` uses the closed form for `L_1`
    /// and the discrete solver otherwise.
    pub fn initial_profile(&self, grid: &Grid) -> Result<Profile> {
        let ic = &self.initial;
        match ic.kind {
            InitialKind::Zero => Ok(Profile::zeros(grid)),
            InitialKind::Steady => {
                let a = ic
                    .amplitude
                    .ok_or_else(|| Error::Config("initial.amplitude is required for kind = \"steady\"".into()))?;
                let force = crate::model::PiecewiseConstant::constant(a);
                Ok(crate::steady::solve_steady_numeric(&self.operator()?, &force, grid, self.force.sampling, 1e-9)?
                    .profile)
            }
            InitialKind::Tent => {
                let peak = ic.peak.unwrap_or(0.5);
                let height = ic.height.unwrap_or(1.0);
                if !(peak > 0.0 && peak < 1.0) {
                    return Err(Error::Config(format!("initial.peak must lie in (0, 1), got {peak}")));
                }
                Ok(Profile::tent(grid, peak, height))
            }
            InitialKind::File => {
                let path = ic
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("initial.path is required for kind = \"file\"".into()))?;
                let p = crate::io::read_profile(path)?;
                if p.n_cells() != grid.n_cells() {
                    return Err(Error::Config(format!(
                        "{} has {} cells, grid.n_cells = {}",
                        path.display(),
                        p.n_cells(),
                        grid.n_cells()
                    )));
                }
                Ok(p)
            }
        }
    }
}
