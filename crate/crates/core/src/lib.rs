//! Numerical laboratory for conical stochastic maximal `L^p`-regularity of
//! divergence-form elliptic operators.
//!
//! The crate discretizes `A = -div a∇` on a periodic lattice, samples
//! truncated cylindrical noise, evaluates Itô stochastic convolutions, and
//! measures weighted parabolic tent-space norms. On top of those pieces,
//! [`lab`] runs Monte-Carlo ratio experiments and [`spde`] solves the
//! gradient fixed-point problem `V = ∇S(·)u₀ + ∇S⋄B(V)` pathwise.

pub mod cli;
pub mod elliptic;
pub mod error;
pub mod lab;
pub mod lattice;
pub mod numeric;
pub mod spde;
pub mod stochastic;
pub mod tent;

pub use error::{LabError, Result};
