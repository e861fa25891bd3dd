//! Single-excitation dynamics in a synthetic frequency lattice.
//!
//! The lattice sites are the evenly spaced standing-wave modes of a long
//! superconducting cable. A flux-modulated boundary element drives photon
//! hopping between modes, and a transmon with a tunable coupler prepares and
//! reads out single photons. Everything here lives in the single-excitation
//! subspace `{vacuum, qubit, mode m}`, so the dynamics is linear evolution of
//! one complex vector.
//!
//! Units: configuration is in ordinary frequency (MHz) and time (μs).
//! Hamiltonian matrices are angular (rad/μs).

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod model;
pub mod protocols;

pub use error::{Error, Result};
pub use model::{
    CouplingScaling, DriveTone, Frame, HamiltonianMatrix, ModeLattice, QubitCoupler, SingleExcitationState,
};

/// Complex scalar used for all amplitudes and matrix entries.
pub type C64 = nalgebra::Complex<f64>;
