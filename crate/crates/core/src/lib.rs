//! Universal control of non-Hermitian bosonic modes through Heisenberg passages.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: truncated multimode Fock spaces, ladder operators, state factories, fidelities.
//! * [`frames`]: ancillary frame matrices, gauge potentials, the rotated coefficient matrix and
//!   the frame unitary on truncated space.
//! * [`pulses`]: control schedules, synthesized coupling/detuning pulses and global-phase records.
//! * [`evolution`]: ket, dual, ensemble and Lindblad integration plus passage verification.
//! * [`spectrum`]: eigenvalue tracking, PT classification, exceptional points, scattering.
//! * [`experiment`]: configuration-driven runs, presets, checkpoints and sweeps.

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod fock;
pub mod frames;
pub mod linalg;
pub mod ode;
pub mod pulses;
pub mod spectrum;

pub use error::{Error, Result};
pub use evolution::{IntegratorConfig, LindbladParams, Trajectory};
pub use fock::{FockSpace, Frame, ModeOperator, OperatorKind, Prepared, QuantumState, StateData};
pub use frames::{FrameMatrix, FrameParams, GaugePotential, Waveform};
pub use linalg::{CMat, CVec, C64};
pub use pulses::{ControlSchedule, GammaSign, PhaseRecord, PulseSample};
pub use spectrum::{PtPhase, ScatteringSample, SpectrumPoint};
