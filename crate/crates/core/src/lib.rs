//! Radially symmetric numerical laboratory for the focusing energy-critical heat
//! equation `u_t = Lap u + |u|^{4/(d-2)} u` (d = 4: `u_t = Lap u + |u|^2 u`).
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision instantiation used by the harness.

pub mod blowup;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod profiles;
pub mod quadrature;
pub mod scalar;
pub mod tridiag;
pub mod variational;

pub use diagnostics::DiagnosticSample;
pub use error::{Error, Result};
pub use evolve::{simulate, CheckpointSchedule, EvolveConfig, RunRecord, Verdict, VerdictKind};
pub use grid::{Boundary, Grading, GridSpec, RadialField, RadialGrid};
pub use scalar::Scalar;
pub use variational::{Energy, GroundState, VariationalConstants};

pub type Grid = RadialGrid<f64>;
pub type Field = RadialField<f64>;
pub type Constants = VariationalConstants<f64>;
pub type Record = RunRecord<f64>;
pub type Sample = DiagnosticSample<f64>;
