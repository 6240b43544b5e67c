//! Operator graphs, forces, grids and profiles shared by all solvers.

mod force;
mod grid;
mod operator;

pub use force::{ForceField, ForceTerm, PiecewiseConstant, Sampling, TimeLaw};
pub use grid::{Grid, Profile};
pub use operator::{FluxInterval, OperatorKind, OperatorSpec, PolyTable};
