//! Discrete Liouville dynamical percolation on the triangular lattice.
//!
//! Critical site percolation whose Poisson clock rates come from a Gaussian
//! multiplicative chaos measure, together with exact Fourier-Walsh oracles
//! for small Boolean crossing functions.

// `!(x > 0.0)` is used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod gmc;
pub mod lattice;
pub mod par;
pub mod perc;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{LdpError, Result};
