//! Simulation and finite-sample diagnostics for central limit theorems of
//! associated random sequences.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: families, blocking schemes and experiment configuration.
//! - [`generators`]: seeded, reproducible sample paths for every family.
//! - [`covariance`]: analytic and empirical covariance structure, the Cox
//!   coefficient, the Hoeffding covariance identity and association probes.
//! - [`blocking`]: block statistics and every blocking hypothesis as a
//!   finite-n diagnostic with a trend verdict.
//! - [`cf`]: empirical characteristic functions and block-factorisation gaps.
//! - [`harness`]: Monte Carlo normality runs and theorem-level reports.
//!
//! Replicate-level work fans out through [`exec::Exec`]; with the default
//! `parallel` feature it runs on rayon, otherwise sequentially. Results are
//! bit-identical either way.

pub mod blocking;
pub mod cf;
pub mod covariance;
pub mod error;
pub mod exec;
pub mod generators;
pub mod harness;
pub mod model;

pub use error::{Error, Result};
pub use exec::Exec;

/// Tool version recorded in every emitted report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
