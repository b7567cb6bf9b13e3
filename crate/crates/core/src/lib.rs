//! Minimum-phase spectral factorization of rank-deficient rational spectral
//! densities, in discrete and continuous time.
//!
//! The pipeline extracts the deterministic relation H between the blocks of
//! a partitioned low-rank density, builds a minimal realization of
//! G1^T H^T, solves a small Stein or Lyapunov equation on the anti-stable
//! block, and assembles the full-column-rank minimum-phase factor through a
//! coprime factorization with an inner denominator. On top of the factor
//! sit a one-step-ahead Wiener filter and a simple identification pipeline
//! for low-rank vector processes.

pub mod analysis;
pub(crate) mod cpoly;
pub mod error;
pub mod factor;
pub mod ident;
pub mod outer_inner;
pub mod poly;
pub mod rational;
pub mod realization;
pub mod report;
pub mod rmatrix;
pub mod sylvester;
pub mod tol;
pub mod wiener;

pub use error::{Error, Result};
pub use factor::{FactorizationResult, PartitionedSpectralDensity};
pub use poly::Polynomial;
pub use rational::{RationalFunction, Variable};
pub use realization::{minimal_realization, StateSpace};
pub use rmatrix::{RationalMatrix, RationalMatrixDoc};
