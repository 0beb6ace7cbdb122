//! Config-driven runner for the skewlab experiments.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::Config;
pub use error::CliError;
