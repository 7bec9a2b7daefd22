//! Loop SPAM tomography for polarization qubits.
//!
//! * [`qubit`]: density matrices, Stokes and observable vectors, fidelities.
//! * [`optics`]: wave-plate bench simulator with injectable correlated errors.
//! * [`spam`]: partial-determinant test for correlated SPAM errors.
//! * [`recon`]: state/detector tomography by inversion and the loop bootstrap.
//! * [`harness`]: config files, measurement files, orchestration and reports.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod optics;
pub mod qubit;
pub mod recon;
pub mod spam;

pub use error::{Error, Result};
pub use linalg::{Mat3, Vec3};
pub use optics::{ErrorInjection, ExperimentPlan, NoiseModel, Scheme, Shots, SourceState, WavePlateSetting};
pub use qubit::{DensityMatrix, ObservableVector, PovmPair, StokesVector};
pub use recon::{loop_bootstrap, qdt_invert, qst_invert, score_reconstruction, MeasMatrix, PrepMatrix, ReconstructionScore};
pub use spam::{delta_statistics, detect, localize, partial_determinant, DeltaStats, DetectionReport, ExpectationMatrix, MatrixShape};
