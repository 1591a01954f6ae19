//! Pair correlations of dilated lacunary sequences modulo one.

pub mod config;
pub mod constants;
pub mod counting;
pub mod decimal;
pub mod error;
pub mod experiments;
pub mod fixed;
pub mod interval;
pub mod report;
pub mod sequences;
pub mod statistics;
pub mod testfn;
pub mod verify;

pub use error::{Error, Result};
