//! Higher-order Newton methods whose steps are computed by semidefinite
//! programming.
//!
//! Each iteration expands the objective to order `d`, adds the smallest
//! multiple of `|x - x_k|^d'` that makes the expansion sos-convex (one SDP),
//! and moves to the minimizer of that surrogate, read off the moment matrix of
//! a second SDP.

pub mod error;
pub mod jets;
pub mod linalg;
pub mod newton;
pub mod poly;
pub mod sdp;
pub mod sos;
pub mod univariate;

pub use error::{Error, Result};
