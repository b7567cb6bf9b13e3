//! Numerical tolerances used across the crate.
//!
//! The cancellation tolerance can be overridden per thread (the CLI exposes
//! it as `--tol-cancel`); everything else is a fixed constant.

use std::cell::Cell;

/// Two roots cancel when |r1 - r2| < tol * (1 + |r1|).
pub const CANCEL_DEFAULT: f64 = 1e-8;

/// Trailing polynomial coefficients below this relative threshold are trimmed.
pub const COEFF_TRIM: f64 = 1e-12;

/// Relative singular-value threshold for rank decisions.
pub const RANK_REL: f64 = 1e-8;

/// Stability-boundary margin: a pole is strictly stable when it is inside
/// the region by more than this; zeros may exceed the region by it.
pub const BOUNDARY: f64 = 1e-10;

/// Pole clustering tolerance for realization block construction.
pub const POLE_CLUSTER: f64 = 1e-7;

/// Spectral-disjointness tolerance for Sylvester-type uniqueness checks.
pub const DISJOINT: f64 = 1e-8;

thread_local! {
    static CANCEL: Cell<f64> = const { Cell::new(CANCEL_DEFAULT) };
}

/// Current root-cancellation tolerance for this thread.
pub fn cancel() -> f64 {
    CANCEL.with(Cell::get)
}

/// Override the root-cancellation tolerance for this thread.
pub fn set_cancel(tol: f64) {
    assert!(tol > 0.0 && tol.is_finite(), "cancellation tolerance must be positive");
    CANCEL.with(|c| c.set(tol));
}
