//! Deterministic federated-learning simulator with a GAN-based adversary that
//! reconstructs a victim's class images from the shared global model.

pub mod attack;
pub mod data;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
