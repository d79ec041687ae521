//! Sparse signal recovery from nonadaptive linear measurements.
//!
//! The crate covers the full compressed-sensing pipeline at desk scale:
//! orthonormal DCT sparsification ([`transforms`]), random sensing matrices
//! with coherence and restricted-isometry analysis ([`sensing`]), equality
//! constrained l1 / greedy / exhaustive-l0 recovery ([`solvers`]), and an
//! end-to-end speech-style recovery experiment with CSV reporting
//! ([`experiment`]).
//!
//! Everything is deterministic: random objects are keyed by explicit 64-bit
//! seeds (see [`rng`]) and repeated runs reproduce results bit for bit,
//! independent of thread count.

pub mod error;
pub mod experiment;
pub mod rng;
pub mod sensing;
pub mod solvers;
pub mod transforms;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, SignalSource, SolverChoice, SweepReport, SweepRow};
pub use sensing::{CoherenceResult, MatrixKind, MeasurementVector, RipEstimate, SensingMatrix};
pub use solvers::{RecoveryProblem, RecoveryResult, SolverConfig, SolverStatus};
pub use transforms::{CoefficientVector, PowerLawFit, Signal};
