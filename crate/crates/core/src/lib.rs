//! Stochastic accelerated primal-dual methods for nonconvex-concave minimax problems.

mod error;
pub mod linalg;

pub mod datasets;
pub mod eval;
pub mod outer;
pub mod params;
pub mod problem;
pub mod prox;
pub mod sapd;
pub mod vr;

pub use error::{Result, SolverError};
pub use outer::{sapd_plus_run, sapd_plus_vr_run, InnerSchedule, OuterConfig, OuterResult, StageRecord, StopRule};
pub use problem::{Coupling, FiniteSum, ProblemConstants, ProblemSpec};
pub use sapd::{sapd_run, SapdParams};
pub use vr::{vr_sapd_run, VrParams};
