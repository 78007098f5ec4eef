//! File formats, data generation, graph propagation, reports and the
//! command-line front end for [`lqm_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod graph;
pub mod mixture;
pub mod report;

pub use error::{IoError, Result};
