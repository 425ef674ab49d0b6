//! Numerical kit for covariance-gated information-bottleneck adapters.
//!
//! - [`tensor`]: dense matrices, kernels with analytic derivatives, gradient checking
//! - [`adapter`]: the covariance-gated adapter and its fused dual-pathway variant
//! - [`oracle`]: iterative information-bottleneck channel clustering and its
//!   attention-form equivalent
//! - [`corruptions`]: deterministic image corruptions over five severity levels

pub mod adapter;
pub mod corruptions;
pub mod error;
pub mod oracle;
pub mod tensor;

pub use error::{Error, Result};
