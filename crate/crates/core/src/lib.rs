//! Reflection coupling for SDEs driven by isotropic α-stable noise.
//!
//! The crate builds explicit Lyapunov profiles `ψ` for the distance between two
//! coupled solutions, certifies exponential contraction rates in `W_p`, and
//! simulates the coupling to check those rates empirically.

// `!(x > 0.0)` is the NaN-rejecting validation idiom throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod coupling;
pub mod diagnostics;
pub mod drift;
pub mod error;
pub mod psi;
pub mod quadrature;
pub mod rng;
pub mod stable_noise;
pub mod wasserstein;

pub use error::{Error, Result};
