//! Three-compartment model of white blood cell production with a feedback
//! signal on self-renewal: steady states, local stability, Hopf points,
//! numerical integration, attractor classification and parameter sweeps.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cubic;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod integrator;
pub mod model;
pub mod presets;
pub mod stability;
pub mod sweep;

pub use error::{Error, Result};
pub use integrator::{integrate, IntegrationConfig, Trajectory};
pub use model::{CellState, EquilibriumLabel, ModelParameters, ParamName, SteadyState};
pub use exec::Execution;
pub use dynamics::{classify, AttractorKind, AttractorVerdict};
pub use stability::{hopf_point, stability_reports, Classification, HopfReport, StabilityReport};
pub use sweep::{run_sweep, Axis, SweepResult, SweepSpec};
