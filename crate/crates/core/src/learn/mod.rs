//! Reconstruction of the system-memory unitary from RB outcomes.

pub mod bfgs;
pub mod mesh;
pub mod objective;
pub mod train;

pub use bfgs::{bfgs_minimize, BfgsOptions, BfgsResult, StopReason};
pub use mesh::{decompose, to_unitary, UnitaryParams};
pub use objective::{loss, loss_gradient, Objective};
pub use train::{chi_ramp, train, RestartReport, TrainConfig, TrainReport};
