//! Implicit-Euler solver for the one-dimensional singular diffusion
//!
//! ```text
//!   u_t - (L(u_x))_x = f   on (0, 1),   u(0) = u(1) = 0,
//! ```
//!
//! where `L` is a monotone graph with a jump at the origin. Flat pieces of the
//! solution (facets) are tracked, and reference steady states are provided in
//! closed form.

pub mod config;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod facets;
pub mod io;
pub mod model;
pub mod prox;
pub mod steady;
mod tridiag;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use model::{
    FluxInterval, ForceField, ForceTerm, Grid, OperatorKind, OperatorSpec, PiecewiseConstant, PolyTable, Profile,
    Sampling, TimeLaw,
};
pub use prox::{
    brute_force_step_oracle, default_tolerance, implicit_step, implicit_step_warm, inclusion_residual,
    step_objective, StepCertificate, StepProblem,
};
pub use steady::{
    solve_constant_force, solve_steady_numeric, solve_three_facet, three_facet_compatibility, three_facet_endpoints,
    verify_steady_profile, verify_steady_solution, NumericSteady, SteadyFacet, SteadySolution, SteadyVerification,
};
pub use evolve::{evolve, EvolveConfig, TrajectoryReport};
pub use facets::{detect_facets, Facet, FacetKind, FacetSet};
