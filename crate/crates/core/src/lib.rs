//! Quadrature-space information measures for complex eigenmodes.
//!
//! The crate covers the full chain from a two-mode non-Hermitian
//! coupled-mode model to per-parameter entropies:
//!
//! * [`coupled_mode`] builds the 2x2 effective Hamiltonian, traces its
//!   eigenvalue branches over a control parameter and locates the avoided
//!   crossing.
//! * [`field_synth`] turns coupled-mode eigenvectors into hybridized complex
//!   fields on an elliptical domain.
//! * [`gauge`] fixes the global phase of each field from the principal axis
//!   of its weighted (R, I) second moments.
//! * [`quad_hist`] bins aligned clouds into a common NB x NB window.
//! * [`infotheory`] computes Shannon entropies and mutual information in nats.
//! * [`pipeline`] runs sweeps and robustness checks; [`cli_io`] handles files
//!   and the command line surface.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod coupled_mode;
pub mod error;
pub mod field_synth;
pub mod gauge;
pub mod infotheory;
pub mod pipeline;
pub mod quad_hist;
pub mod summation;

pub use error::{Error, Result};
