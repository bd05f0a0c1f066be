//! Dense feed-forward networks with hand-written backpropagation and Adam.
//!
//! Actor, critic and the replay score network are all [`Mlp`] instances.
//! Gradients are exact; [`gradcheck`] verifies them against central
//! finite differences.

mod adam;
pub mod gradcheck;
mod matrix;
mod mlp;

pub use adam::Adam;
pub use gradcheck::{grad_check, GradCheckReport, OutputLoss};
pub use matrix::Matrix;
pub use mlp::{Activation, ForwardCache, GradTape, Mlp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {what} in layer {layer}")]
    NonFinite { layer: usize, what: &'static str },
}
