//! Phase-space Bell-CHSH tests for a qubit-oscillator cat state.
//!
//! The library evaluates the correlation function C(beta, theta) = <sigma(theta) (x) Pi(beta)>
//! for the entangled state (|up, D> + |down, -D>)/sqrt(2) under several open-system dynamics
//! (amplitude/phase damping, quantum Brownian motion, spin-star dephasing, memory-kernel
//! dissipation), maximizes the CHSH combination over measurement settings, and cross-checks
//! every closed form against a brute-force truncated-Fock oracle.

pub mod bell;
pub mod brownian;
pub mod cli;
pub mod markov;
pub(crate) mod numerics;
pub mod oracle;
pub mod phase_space;
pub mod postmarkov;
pub mod spinstar;

mod error;

pub use error::{Error, Result};
pub use phase_space::{CatState, GaussianKernel, Spin};
