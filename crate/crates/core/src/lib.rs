//! Numerical laboratory for bipartite pure-state entanglement manipulation.
//!
//! The crate is split into four layers:
//!
//! - [`qmath`]: dense state calculus (trace distance, fidelity, Schmidt
//!   decomposition, partial traces, nearest product extensions).
//! - [`spectrum`]: exact log-domain spectra of `rho^{⊗n}` grouped into
//!   multiplicity classes, plus the Gaussian comparison quantities.
//! - [`sigsub`]: minimal dimensions of δ-significant subspaces and checkers
//!   for the rank/tensor/growth properties built on top of them.
//! - [`locc`]: a two-party protocol IR, its reduction to one-way standard
//!   form, dilution and concentration protocols, and the communication-bound
//!   certificate.
//!
//! All logarithms are base 2.

pub mod error;
pub mod locc;
pub mod qmath;
pub mod random;
pub mod sigsub;
pub mod spectrum;

pub use error::{Error, Result};

/// Tolerance for validity checks (Hermiticity, trace, positivity, norms).
pub const VALIDITY_TOL: f64 = 1e-10;
/// Tolerance for equality assertions between two computed quantities.
pub const EQUALITY_TOL: f64 = 1e-9;
/// Tolerance when an oracle mirrors the exact arithmetic of the implementation.
pub const ORACLE_TOL: f64 = 1e-12;
