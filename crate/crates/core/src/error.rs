//! Error type shared by all modules of the crate.

use std::fmt;

/// Errors produced by polynomial, rational, realization and factorization
/// routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Evaluation point is within tolerance of a denominator root.
    PoleProximity { point: (f64, f64), root: (f64, f64) },
    /// Matrix operands are not conformable.
    DimensionMismatch { expected: String, found: String },
    /// Operands live in different transform variables (z vs s).
    VariableMismatch,
    /// Square rational matrix has identically zero determinant.
    SingularMatrix,
    /// Input does not have full normal column rank.
    RankDeficientInput { rank: usize, cols: usize },
    /// Rational matrix has an entry with numerator degree above denominator degree.
    NotProper { row: usize, col: usize },
    /// Similarity transform is numerically singular.
    SingularTransform,
    /// Sylvester-type equation has no unique solution; the offending
    /// eigenvalue pair is reported.
    NonUniqueSolution { lambda_i: (f64, f64), lambda_j: (f64, f64) },
    /// A stated precondition does not hold.
    PreconditionViolated(String),
    /// Leading block of the partitioned density is normal-rank deficient.
    SingularBlock,
    /// A zero sits on the stability boundary within tolerance.
    BoundaryZero { zero: (f64, f64) },
    /// A pole sits on the stability boundary within tolerance.
    BoundaryPole { pole: (f64, f64) },
    /// Simulation filter is not stable.
    UnstableFilter,
    /// Regression matrix condition number exceeds the allowed bound.
    IllConditioned { condition: f64 },
    /// Iterative estimation failed to converge within the iteration cap.
    NonConvergence { iterations: usize },
    /// Requested operand combination collapses to rank zero or an
    /// inconsistent shape.
    RankCollapse,
    /// An internal consistency check failed after a computation that
    /// should have succeeded; indicates a numerical fault, not user error.
    VerificationFailure(String),
    /// Input document or argument is malformed.
    InvalidInput(String),
    /// Structure is outside the implemented scope (e.g. defective zero
    /// chains in outer-inner extraction).
    Unsupported(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::PoleProximity { point, root } => write!(
                f,
                "evaluation point {}+{}i is within tolerance of pole {}+{}i",
                point.0, point.1, root.0, root.1
            ),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::VariableMismatch => write!(f, "operands use different transform variables"),
            Error::SingularMatrix => write!(f, "matrix determinant is the zero rational function"),
            Error::RankDeficientInput { rank, cols } => {
                write!(f, "input has normal column rank {rank} < {cols}")
            }
            Error::NotProper { row, col } => {
                write!(f, "entry ({row},{col}) is not proper")
            }
            Error::SingularTransform => write!(f, "similarity transform is singular"),
            Error::NonUniqueSolution { lambda_i, lambda_j } => write!(
                f,
                "non-unique solution: eigenvalue pair ({}+{}i, {}+{}i) violates spectral disjointness",
                lambda_i.0, lambda_i.1, lambda_j.0, lambda_j.1
            ),
            Error::PreconditionViolated(msg) => write!(f, "precondition violated: {msg}"),
            Error::SingularBlock => write!(f, "leading density block is normal-rank deficient"),
            Error::BoundaryZero { zero } => {
                write!(f, "zero {}+{}i lies on the stability boundary", zero.0, zero.1)
            }
            Error::BoundaryPole { pole } => {
                write!(f, "pole {}+{}i lies on the stability boundary", pole.0, pole.1)
            }
            Error::UnstableFilter => write!(f, "simulation filter is not stable"),
            Error::IllConditioned { condition } => {
                write!(f, "regression is ill-conditioned (condition number {condition:.3e})")
            }
            Error::NonConvergence { iterations } => {
                write!(f, "iteration did not converge within {iterations} steps")
            }
            Error::RankCollapse => write!(f, "operand has inconsistent shape or zero rank"),
            Error::VerificationFailure(msg) => write!(f, "verification failure: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported structure: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
