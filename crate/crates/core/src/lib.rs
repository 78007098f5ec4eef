//! Dataset condensation by latent quantile matching.
//!
//! A synthetic dataset is learned so that, under randomly initialized
//! feature extractors, the sorted latent features of the synthetic records
//! line up with the real data's latent features evaluated at the quantiles
//! that minimize the Cramér–von Mises statistic. A mean-matching (linear
//! MMD) baseline, evaluation diagnostics, and a class-incremental continual
//! learning harness are included.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, data
//! generation and the command-line tool live in the `lqm` crate.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod condenser;
pub mod continual;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod nn;
pub mod quantiles;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
