//! File formats, thread-pool execution and the command-line driver around
//! `oqe-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod pipeline;

pub use error::{Error, Result};
