use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid depth {depth}: {reason}")]
    InvalidDepth { depth: usize, reason: &'static str },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("resonant coupling: the effective coupling 2J^2/dh is undefined at dh = 0")]
    ResonantCoupling,

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("dense construction limited to k <= {max}, got {k}")]
    TooLarge { k: usize, max: usize },
}
