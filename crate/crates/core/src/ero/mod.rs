//! Learned replay: a score network decides which stored transitions the agent
//! may train on, and is itself trained by policy gradient on the improvement
//! of the agent's recent episode returns.

mod features;
mod policy;
mod sampler;
mod tracker;

pub use features::{FeatureNormalizer, RunningStats, TransitionFeatures, FEATURE_DIM};
pub use policy::{mask_log_likelihood, surrogate_gradient, surrogate_loss, EroPolicy, LOG_CLAMP};
pub use sampler::{EroCounters, EroSampler, MaskState};
pub use tracker::ReplayRewardTracker;

use crate::nn::Activation;
use crate::replay::ReplayError;

#[derive(Clone, Debug, PartialEq)]
pub struct EroConfig {
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    /// Output-layer weights and biases start in `U(-b, b)`.
    pub output_init_bound: f64,
    pub learning_rate: f64,
    /// Policy-gradient steps per episode boundary.
    pub replay_updating_steps: usize,
    /// Mask bits per policy-gradient mini-batch.
    pub policy_batch_size: usize,
    /// Episodes averaged into the cumulative-reward estimate.
    pub reward_window: usize,
    /// Keep transitions stored after a refresh out of the subset until the next refresh.
    pub subset_strict: bool,
    /// Refresh the subset even when no replay reward is available yet.
    pub subset_refresh_always: bool,
    /// Reuse cached scores at refresh instead of re-scoring the whole buffer.
    pub lazy_refresh: bool,
}

impl Default for EroConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            hidden_activation: Activation::Relu,
            output_init_bound: 3e-3,
            learning_rate: 1e-4,
            replay_updating_steps: 1,
            policy_batch_size: 64,
            reward_window: 100,
            subset_strict: false,
            subset_refresh_always: false,
            lazy_refresh: false,
        }
    }
}

impl EroConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ReplayError::Config(format!(
                "ero learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.output_init_bound.is_finite() && self.output_init_bound >= 0.0) {
            return Err(ReplayError::Config("ero output_init_bound must be >= 0".into()));
        }
        if self.policy_batch_size == 0 {
            return Err(ReplayError::Config("ero policy batch size must be positive".into()));
        }
        if self.reward_window == 0 {
            return Err(ReplayError::Config("ero reward window must be positive".into()));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(ReplayError::Config("ero hidden sizes must be positive".into()));
        }
        Ok(())
    }
}
