//! Compressive wideband spectrum sensing with known allocation boundaries.
//!
//! The crate simulates sub-Nyquist sensing of a clustered-sparse wideband
//! spectrum and recovers it with group-sparse convex programs:
//!
//! - [`bandplan`]: the fixed frequency-allocation partition.
//! - [`sigmodel`]: synthetic spectra, time signals and AWGN.
//! - [`sampling`]: random measurement operators and the sensing map.
//! - [`solvers`]: `ℓ1`, equal-block `ℓ2/ℓ1` and section-wise `ℓ2/ℓ1`
//!   recovery on a shared ADMM engine, plus a dense reference solver.
//! - [`detect`]: per-section energies, occupancy decisions and the
//!   energy betterment ratio.
//! - [`harness`]: seeded Monte Carlo experiments, CSV output and the CLI.

// `!(a < b)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandplan;
pub mod detect;
mod dft;
pub mod harness;
pub mod linalg;
pub mod sampling;
pub mod sigmodel;
pub mod solvers;

pub use bandplan::{Band, BandPlan, BandPlanError, IndexRange, Section};
pub use detect::{DetectionReport, Normalization, SubbandEnergies};
pub use dft::UnitaryDft;
pub use sampling::{MeasurementOperator, MeasurementVector, OperatorKind, SensingMap};
pub use sigmodel::{SignalMode, SignalSpec, SpectrumVector, TimeSignal};
pub use solvers::{Partition, Program, SolveResult, SolverConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
