//! Minimal feed-forward network engine: dense / leaky-ReLU / dropout / tanh
//! layers, manual backpropagation, Adam, and a flat checkpoint format.

mod adam;
pub mod checkpoint;
mod matrix;
mod net;

pub use adam::{AdamConfig, AdamState};
pub use matrix::RealMatrix;
pub use net::{dense_forward, DenseParams, LayerSpec, Mode, NeuralNet, Tape};
