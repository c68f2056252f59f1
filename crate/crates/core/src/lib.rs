//! High-order regularization (HR) for extreme learning machines.
//!
//! * [`regcore`]: the HR estimator, its residuals, bounds and
//!   regularization-matrix strategies.
//! * [`elmnet`]: extreme learning machine with batch and incremental trainers.
//! * [`qagent`]: Q-learning agents (regularized ELM and a gradient baseline).
//! * [`cartpole`]: a deterministic cart-pole simulator.

pub mod cartpole;
pub mod elmnet;
pub mod linalg;
pub mod qagent;
pub mod regcore;

pub use linalg::Matrix;
