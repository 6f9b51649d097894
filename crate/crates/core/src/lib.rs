//! Stochastic approximation processes driven by differential inclusions, and
//! the Markovian fictitious play (MFP) learning model.
//!
//! The crate is split into four layers:
//!
//! * [`geometry`] compact convex images (vertex-described polytopes), the
//!   [`geometry::SetValuedMap`] contract, δ-inflation and sampled validation
//!   of the standard-map axioms.
//! * [`dynamics`] Euler solutions of `ẋ ∈ F(x)`, affine interpolated
//!   processes, the Λ^δ residual, asymptotic-pseudotrajectory window
//!   distances, limit sets and attractor certificates.
//! * [`game`] bimatrix games, best-response geometry, MFP Metropolis kernels
//!   with their Gibbs invariant measures and pseudo-inverses, and the energy
//!   barrier statistics that bound the admissible inverse-temperature growth.
//! * [`sim`] seeded MFP replicas, noise decomposition, the Δ(n,T) statistic,
//!   tail tables and convergence-probability estimates.
//!
//! [`cli`] is the batch front end used by the `mfp` binary.

pub mod cli;
pub mod dynamics;
mod error;
pub mod game;
pub mod geometry;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
