#![no_std]
//! Learning open-quantum-evolution models from randomized benchmarking data
//! and analysing the temporal correlations they encode.

// negated float comparisons are deliberate: NaN must fail validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod clifford;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod learn;
pub mod linalg;
pub mod nonmarkov;
pub mod oqe;
pub mod pt;
pub mod sim;

pub use error::{Error, Result};
