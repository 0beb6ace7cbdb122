//! Coupled master–slave quadratic maps and their Markov-chain analogue:
//! invariant and stationary densities, drift and minorization certificates,
//! weak-limit diagnostics and generalized dimensions.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod maps;
pub mod measures;
pub mod operator;
pub mod rng;
pub mod stochastic;

pub use density::DensityOnI;
pub use error::{Error, Result};
pub use maps::QuadraticMap;
