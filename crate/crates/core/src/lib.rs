//! Numerical laboratory for Caputo fractional stochastic differential equations
//!
//! The central object is the scalar Volterra integral equation
//!
//! ```text
//! X_t = x0 + (1/Γ(α)) ∫₀ᵗ (t−s)^{α−1} b(s, X_s) ds
//!          + (1/Γ(α)) ∫₀ᵗ (t−s)^{α−1} σ(s, X_s) dB_s ,    α ∈ (1/2, 1],
//! ```
//!
//! where the second integral is an Itô integral. Everything in this crate
//! exists to measure how the solution depends on the fractional order α:
//!
//! - [`specfun`] — Gamma/digamma/trigamma, singular-kernel integrals and the
//!   exactly integrated discretization weights every solver consumes.
//! - [`gronwall`] — explicit singular-Gronwall bounds and a checker that
//!   verifies they dominate discrete solutions of the integral inequality.
//! - [`paths`] — uniform time grids and counter-based Brownian increments,
//!   reproducible cell-by-cell regardless of execution schedule.
//! - [`solver`] — the Volterra–Euler scheme, including coupled solves of
//!   several orders on one Brownian path (common random numbers).
//! - [`variation`] — the first-variation process Y_β, the L² limit of the
//!   difference quotient (X_α − X_β)/(α − β).
//! - [`malliavin`] — first and second Malliavin derivative grids, Sobolev
//!   norms and inverse-moment estimates.
//! - [`rates`] — Monte Carlo estimators and log–log regressions that turn
//!   coupled simulations into strong/weak convergence-rate measurements.

pub mod error;
pub mod gronwall;
pub mod malliavin;
pub mod paths;
pub mod rates;
pub mod solver;
pub mod specfun;
pub mod variation;

pub use error::{Error, Result};
