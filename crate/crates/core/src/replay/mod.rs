//! Transition storage and the interchangeable replay samplers.
//!
//! Every sampler implements [`ReplaySampler`] and is selected by name through
//! [`crate::registry::SamplerRegistry`]. The built-ins are:
//!
//! * `uniform`: i.i.d. uniform slots.
//! * `per_prop`: proportional prioritized replay on a [`SumTree`].
//! * `per_rank`: rank-based prioritized replay with a power-law over TD-error ranks.
//! * `ero`: the learned replay policy in [`crate::ero`].

mod buffer;
mod per_prop;
mod per_rank;
mod segment_tree;
pub mod snapshot;
mod transition;
mod uniform;

pub use buffer::{BufferCounters, ReplayBuffer, SlotSet, StoreOutcome};
pub use per_prop::PerProportional;
pub use per_rank::PerRank;
pub use segment_tree::{Combine, Max, MaxTree, SegmentTree, Sum, SumTree};
pub use transition::Transition;
pub use uniform::UniformSampler;

use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("replay buffer is empty")]
    Empty,
    #[error("{what} has {got} components, expected {expected}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("priorities are degenerate (total mass {total})")]
    DegeneratePriorities { total: f64 },
    #[error("invalid replay configuration: {0}")]
    Config(String),
    #[error("replay policy network: {0}")]
    Nn(#[from] NnError),
}

/// Slots drawn for one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledBatch {
    pub slots: Vec<usize>,
    /// Insertion sequence numbers at sampling time, used to detect stale updates.
    pub seqs: Vec<u64>,
    /// Normalized importance-sampling weights (prioritized samplers only).
    pub weights: Option<Vec<f64>>,
}

impl SampledBatch {
    pub fn new(buffer: &ReplayBuffer, slots: Vec<usize>, weights: Option<Vec<f64>>) -> Self {
        let seqs = slots.iter().map(|&s| buffer.seq(s)).collect();
        Self { slots, seqs, weights }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// What the learned replay policy did at an episode boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayPolicyReport {
    pub replay_reward: Option<f64>,
    pub subset_size: usize,
    pub subset_fallbacks: u64,
    /// Mean of the recent-episode window used as the cumulative-reward estimate.
    pub window_mean: f64,
}

/// A replay strategy: decides which stored transitions train the agent.
pub trait ReplaySampler: Send {
    fn name(&self) -> &'static str;

    /// Called right after `buffer.store` placed a transition in `slot`.
    fn on_store(
        &mut self,
        _buffer: &mut ReplayBuffer,
        _slot: usize,
        _global_step: u64,
    ) -> Result<(), ReplayError> {
        Ok(())
    }

    fn sample(&mut self, buffer: &mut ReplayBuffer, batch_size: usize) -> Result<SampledBatch, ReplayError>;

    /// Feeds back the TD errors of a replayed batch. Returns how many slots were updated.
    fn update_priorities(
        &mut self,
        buffer: &mut ReplayBuffer,
        batch: &SampledBatch,
        td_errors: &[f64],
        _global_step: u64,
    ) -> Result<usize, ReplayError> {
        Ok(buffer.update_priorities(&batch.slots, &batch.seqs, td_errors)?.len())
    }

    /// Called once per finished episode with its undiscounted return.
    fn on_episode_end(
        &mut self,
        _buffer: &mut ReplayBuffer,
        _episode_return: f64,
        _global_step: u64,
    ) -> Result<Option<ReplayPolicyReport>, ReplayError> {
        Ok(None)
    }
}

/// Prioritized-replay hyperparameters shared by `per_prop` and `per_rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerConfig {
    /// Priority exponent.
    pub alpha: f64,
    /// Initial importance-sampling exponent, annealed linearly to 1.
    pub beta0: f64,
    /// Number of sampling calls over which beta reaches 1.
    pub anneal_steps: u64,
    /// Added to `|δ|` so no priority is exactly zero.
    pub epsilon: f64,
    /// Stores between full re-sorts of the rank order.
    pub rank_refresh_interval: u64,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta0: 0.4,
            anneal_steps: 100_000,
            epsilon: 1e-2,
            rank_refresh_interval: 1000,
        }
    }
}

impl PerConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ReplayError::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta0) {
            return Err(ReplayError::Config(format!("beta0 must be in [0, 1], got {}", self.beta0)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ReplayError::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.rank_refresh_interval == 0 {
            return Err(ReplayError::Config("rank_refresh_interval must be positive".into()));
        }
        Ok(())
    }

    /// Importance-sampling exponent after `samples_drawn` sampling calls.
    pub fn beta(&self, samples_drawn: u64) -> f64 {
        if self.anneal_steps == 0 {
            return 1.0;
        }
        let progress = (samples_drawn as f64 / self.anneal_steps as f64).min(1.0);
        self.beta0 + (1.0 - self.beta0) * progress
    }
}

/// `w_i = (N * P(i))^-beta`, divided by the batch maximum so that `w ∈ (0, 1]`.
pub(crate) fn importance_weights(probabilities: &[f64], population: usize, beta: f64) -> Vec<f64> {
    let n = population as f64;
    let raw: Vec<f64> = probabilities.iter().map(|&p| (n * p).powf(-beta)).collect();
    let max = raw.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    raw.into_iter().map(|w| w / max).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_anneals_linearly() {
        let cfg = PerConfig {
            anneal_steps: 100,
            ..PerConfig::default()
        };
        assert_eq!(cfg.beta(0), 0.4);
        assert!((cfg.beta(50) - 0.7).abs() < 1e-12);
        assert_eq!(cfg.beta(100), 1.0);
        assert_eq!(cfg.beta(1000), 1.0);
    }

    #[test]
    fn weights_are_normalized() {
        let w = importance_weights(&[0.5, 0.5], 2, 1.0);
        assert_eq!(w, vec![1.0, 1.0]);
        let w = importance_weights(&[0.25, 0.75], 2, 1.0);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(PerConfig::default().validate().is_ok());
        let bad = PerConfig {
            beta0: 1.5,
            ..PerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
