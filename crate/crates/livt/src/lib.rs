//! Long-tailed recognition laboratory: balanced losses with analytic
//! gradients, a toy masked-autoencoder vision transformer trained in two
//! stages, long-tailed dataset builders, calibration metrics, and
//! brute-force verifiers.

pub mod error;
pub mod losses;
pub mod metrics;
pub mod oracle;
pub mod priors;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
