//! Numerical machinery for coefficient extremal problems on the class S of
//! normalized univalent functions, built on the Loewner differential equation
//! and the Pontryagin maximum principle.
//!
//! The crate is organised bottom-up:
//!
//! - [`series`]: truncated coefficient vectors, functionals, the lower
//!   triangular Toeplitz action `A(a)` and rotations.
//! - [`dynamics`]: right-hand sides of the coefficient, adjoint and companion
//!   systems and a fixed-step RK4 integrator.
//! - [`hamiltonian`]: closed-form pseudo-Hamiltonian derivatives and
//!   trigonometric-polynomial maximization.
//! - [`conditions`]: initial adjoint values, sufficient and necessary
//!   conditions for the two-functional problem and the report pipeline.
//! - [`search`]: the `lambda * a_2 + a_4` example family and a derivative-free
//!   search over driving functions.
//! - [`config`] and [`report`]: scenario files and deterministic JSON output
//!   used by the `loewner` binary.

pub mod conditions;
pub mod config;
pub mod dynamics;
mod error;
pub mod hamiltonian;
pub mod report;
pub mod search;
pub mod series;
mod simplex;

pub use error::{Error, Result};
pub use num_complex::Complex64;
