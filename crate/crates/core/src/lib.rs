//! MIMO link-level simulation with a semi-supervised cycle-consistent
//! least-squares GAN detector and classical/neural baselines.

pub mod channel;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod link;
pub mod nn;

pub use error::{Error, Result};
