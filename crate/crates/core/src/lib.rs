//! Central limit theorem for the log-determinant of sample correlation
//! matrices built from heavy-tailed data.
//!
//! The crate is organised bottom-up:
//!
//! * [`sampling`]: seeded, counter-based generation of heavy-tailed entries.
//! * [`matrix`]: sample covariance, self-normalisation, correlation and a
//!   Cholesky log-determinant.
//! * [`perpendiculars`]: the method-of-perpendiculars recursion for
//!   `log det R`, with the diagonal/off-diagonal split of every step.
//! * [`moments`]: exact moment identities for exchangeable vectors on the
//!   unit sphere, generic over `f64` and exact rationals, plus a brute-force
//!   permutation oracle.
//! * [`asymptotic`]: limiting constants for moments of self-normalised
//!   variables and Monte Carlo convergence diagnostics.
//! * [`clt`]: centering and scaling constants, standardised statistics and
//!   goodness-of-fit tests.
//! * [`experiment`]: the configuration-driven Monte Carlo harness behind the
//!   command-line tool.

pub mod asymptotic;
pub mod clt;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod moments;
pub mod perpendiculars;
pub mod sampling;
pub mod special;

pub use error::{Error, Result};
pub use matrix::{CorrelationMatrix, DataMatrix, SelfNormalizedMatrix};
pub use moments::{MomentKey, MomentTable, Scalar, WeightVector};
pub use perpendiculars::{GirkoTrace, ProjectionState};
pub use sampling::{RngStream, TailLaw};
