//! Simulation and analysis of nonstabilizerness ("magic") dynamics in
//! disordered spin chains.
//!
//! State vectors evolve under a disordered transverse-field Ising chain or a
//! diagonal ℓ-bit model; along the way the stabilizer Rényi entropy, the
//! half-chain entanglement entropy and the Z-gate weight are measured, then
//! averaged over disorder ensembles and compared with analytical predictions.

pub mod cli;
pub mod entangle;
pub mod error;
pub mod fwht;
pub mod harness;
pub mod magic;
pub mod models;
pub mod pauli;
pub mod propagate;
pub mod state;
pub mod theory;
pub mod validate;

pub use error::{Error, Result};
pub use magic::{haar_sre2, sre, sre2, w_z, RenyiIndex};
pub use pauli::PauliString;
pub use state::{Bloch, BlochAngles, NamedState, StateVector};
