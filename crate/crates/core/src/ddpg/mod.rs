//! Deep deterministic policy gradient: actor, critic, target copies and
//! Ornstein-Uhlenbeck exploration.

mod agent;
mod noise;

pub use agent::{
    actor_gradient, actor_loss, critic_gradient, critic_loss, ActionMap, CriticStats, DdpgAgent, TrainBatch,
    TrainOutcome,
};
pub use noise::OuNoise;

use crate::nn::{Activation, NnError};
use crate::replay::ReplayError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DdpgError {
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgConfig {
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_init_bound: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            hidden_activation: Activation::Relu,
            output_init_bound: 3e-3,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.001,
            ou_theta: 0.15,
            ou_sigma: 0.2,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), DdpgError> {
        let bad = |msg: String| Err(DdpgError::Config(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must be in (0, 1], got {}", self.tau));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr.is_finite() && lr > 0.0) {
                return bad(format!("{name} must be > 0, got {lr}"));
            }
        }
        if !(self.ou_theta.is_finite() && self.ou_sigma.is_finite() && self.ou_sigma >= 0.0) {
            return bad("OU parameters must be finite with sigma >= 0".into());
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return bad("hidden sizes must be positive".into());
        }
        Ok(())
    }
}
