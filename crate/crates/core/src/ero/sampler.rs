use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::Matrix;
use crate::replay::{ReplayBuffer, ReplayError, ReplayPolicyReport, ReplaySampler, SampledBatch, SlotSet};

use super::{EroConfig, EroPolicy, ReplayRewardTracker, TransitionFeatures, FEATURE_DIM};

/// Rows scored per forward pass during a full-buffer sweep.
const SWEEP_CHUNK: usize = 2048;

/// Mask bits realized at the most recent subset refresh.
#[derive(Clone, Debug, Default)]
pub struct MaskState {
    /// `Some(bit)` for slots that took part in the last refresh and still hold
    /// the same transition.
    drawn: Vec<Option<bool>>,
    /// Slots with a realized bit; the replay-policy update draws from these.
    eligible: SlotSet,
    pub refreshes: u64,
    pub last_refresh_step: Option<u64>,
}

impl MaskState {
    fn new(capacity: usize) -> Self {
        Self {
            drawn: Vec::with_capacity(capacity.min(1 << 20)),
            eligible: SlotSet::with_capacity(capacity),
            refreshes: 0,
            last_refresh_step: None,
        }
    }

    pub fn bit(&self, slot: usize) -> Option<bool> {
        self.drawn.get(slot).copied().flatten()
    }

    pub fn eligible_slots(&self) -> &[usize] {
        self.eligible.as_slice()
    }

    fn forget(&mut self, slot: usize) {
        if slot < self.drawn.len() {
            self.drawn[slot] = None;
        } else {
            self.drawn.resize(slot + 1, None);
        }
        self.eligible.remove(slot);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EroCounters {
    pub policy_updates: u64,
    /// Replay-policy updates skipped because `r^r` was not finite.
    pub skipped_updates: u64,
    /// Episode ends where no realized mask bits were available for an update.
    pub empty_update_batches: u64,
}

/// The learned replay strategy: score every transition, keep a Bernoulli-masked
/// subset, train the agent uniformly on that subset, and update the scorer by
/// REINFORCE on the change in windowed episode return.
#[derive(Clone, Debug)]
pub struct EroSampler {
    config: EroConfig,
    policy: EroPolicy,
    tracker: ReplayRewardTracker,
    mask: MaskState,
    sample_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    counters: EroCounters,
}

impl EroSampler {
    pub fn new(
        config: EroConfig,
        capacity: usize,
        init_seed: u64,
        sample_rng: ChaCha8Rng,
        policy_rng: ChaCha8Rng,
    ) -> Result<Self, ReplayError> {
        config.validate()?;
        let policy = EroPolicy::new(&config, init_seed)?;
        Ok(Self::with_policy(config, policy, capacity, sample_rng, policy_rng))
    }

    pub fn with_policy(
        config: EroConfig,
        policy: EroPolicy,
        capacity: usize,
        sample_rng: ChaCha8Rng,
        policy_rng: ChaCha8Rng,
    ) -> Self {
        Self {
            tracker: ReplayRewardTracker::new(config.reward_window),
            config,
            policy,
            mask: MaskState::new(capacity),
            sample_rng,
            policy_rng,
            counters: EroCounters::default(),
        }
    }

    pub fn seeded(config: EroConfig, capacity: usize, seed: u64) -> Result<Self, ReplayError> {
        Self::new(
            config,
            capacity,
            seed,
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)),
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(2)),
        )
    }

    pub fn config(&self) -> &EroConfig {
        &self.config
    }

    pub fn policy(&self) -> &EroPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut EroPolicy {
        &mut self.policy
    }

    pub fn tracker(&self) -> &ReplayRewardTracker {
        &self.tracker
    }

    pub fn mask(&self) -> &MaskState {
        &self.mask
    }

    pub fn counters(&self) -> EroCounters {
        self.counters
    }

    fn features(buffer: &ReplayBuffer, slots: &[usize], step: u64) -> Vec<TransitionFeatures> {
        slots
            .iter()
            .map(|&s| TransitionFeatures::of(buffer.get(s), step))
            .collect()
    }

    /// Recomputes `λ` for `slots` with one forward pass.
    fn rescore(&self, buffer: &mut ReplayBuffer, slots: &[usize], step: u64) -> Result<(), ReplayError> {
        let scores = self.policy.score(&Self::features(buffer, slots, step))?;
        for (&slot, score) in slots.iter().zip(scores) {
            buffer.set_priority_score(slot, score);
        }
        Ok(())
    }

    /// Draws `I_i ~ Bernoulli(λ_i)` independently for every live slot and makes
    /// the selected slots the active subset. Returns the subset size.
    pub fn refresh_subset(&mut self, buffer: &mut ReplayBuffer, step: u64) -> Result<usize, ReplayError> {
        if buffer.is_empty() {
            return Ok(0);
        }
        let n = buffer.len();
        if !self.config.lazy_refresh {
            let all: Vec<usize> = (0..n).collect();
            for chunk in all.chunks(SWEEP_CHUNK) {
                self.rescore(buffer, chunk, step)?;
            }
        }
        let mut mask = Vec::with_capacity(n);
        self.mask.drawn.resize(n, None);
        for slot in 0..n {
            let lambda = buffer.get(slot).priority_score;
            let bit = self.policy_rng.random::<f64>() < lambda;
            mask.push(bit);
            self.mask.drawn[slot] = Some(bit);
            self.mask.eligible.insert(slot);
        }
        buffer.set_subset_mask(&mask);
        self.mask.refreshes += 1;
        self.mask.last_refresh_step = Some(step);
        Ok(buffer.subset_len())
    }

    /// Runs the configured number of REINFORCE steps on mini-batches of slots
    /// that carry a realized mask bit. Returns the last surrogate loss.
    pub fn update_policy(
        &mut self,
        buffer: &ReplayBuffer,
        replay_reward: f64,
        step: u64,
    ) -> Result<Option<f64>, ReplayError> {
        if !replay_reward.is_finite() {
            self.counters.skipped_updates += 1;
            return Ok(None);
        }
        let mut last = None;
        for _ in 0..self.config.replay_updating_steps {
            let eligible = self.mask.eligible.as_slice();
            if eligible.is_empty() {
                self.counters.empty_update_batches += 1;
                break;
            }
            let slots: Vec<usize> = (0..self.config.policy_batch_size)
                .map(|_| eligible[self.policy_rng.random_range(0..eligible.len())])
                .collect();
            let bits: Vec<bool> = slots
                .iter()
                .map(|&s| self.mask.bit(s).expect("eligible slots carry a bit"))
                .collect();
            let inputs = self.policy.inputs(&Self::features(buffer, &slots, step));
            debug_assert_eq!(inputs.cols(), FEATURE_DIM);
            last = Some(self.policy.update(&inputs, &bits, replay_reward)?);
            self.counters.policy_updates += 1;
        }
        Ok(last)
    }

    /// Scores for explicit slots, for diagnostics.
    pub fn score_slots(&self, buffer: &ReplayBuffer, slots: &[usize], step: u64) -> Result<Vec<f64>, ReplayError> {
        Ok(self.policy.score(&Self::features(buffer, slots, step))?)
    }

    /// Network inputs for explicit slots.
    pub fn inputs_for(&self, buffer: &ReplayBuffer, slots: &[usize], step: u64) -> Matrix {
        self.policy.inputs(&Self::features(buffer, slots, step))
    }
}

impl ReplaySampler for EroSampler {
    fn name(&self) -> &'static str {
        "ero"
    }

    fn on_store(&mut self, buffer: &mut ReplayBuffer, slot: usize, global_step: u64) -> Result<(), ReplayError> {
        self.mask.forget(slot);
        self.policy.normalizer.observe_store(buffer.get(slot));
        self.rescore(buffer, &[slot], global_step)?;
        if self.config.subset_strict && self.mask.refreshes > 0 {
            buffer.set_in_subset(slot, false);
        }
        Ok(())
    }

    fn sample(&mut self, buffer: &mut ReplayBuffer, batch_size: usize) -> Result<SampledBatch, ReplayError> {
        let slots = buffer.sample_from_subset(batch_size, &mut self.sample_rng)?;
        Ok(SampledBatch::new(buffer, slots, None))
    }

    fn update_priorities(
        &mut self,
        buffer: &mut ReplayBuffer,
        batch: &SampledBatch,
        td_errors: &[f64],
        global_step: u64,
    ) -> Result<usize, ReplayError> {
        let mut updated = buffer.update_priorities(&batch.slots, &batch.seqs, td_errors)?;
        for &slot in &updated {
            self.policy.normalizer.observe_td_error(buffer.get(slot).td_error);
        }
        updated.sort_unstable();
        updated.dedup();
        self.rescore(buffer, &updated, global_step)?;
        Ok(updated.len())
    }

    fn on_episode_end(
        &mut self,
        buffer: &mut ReplayBuffer,
        episode_return: f64,
        global_step: u64,
    ) -> Result<Option<ReplayPolicyReport>, ReplayError> {
        let replay_reward = self.tracker.push_episode(episode_return);
        match replay_reward {
            Some(r) => {
                self.update_policy(buffer, r, global_step)?;
                self.refresh_subset(buffer, global_step)?;
            }
            None if self.config.subset_refresh_always => {
                self.refresh_subset(buffer, global_step)?;
            }
            None => {}
        }
        Ok(Some(ReplayPolicyReport {
            replay_reward,
            subset_size: buffer.subset_len(),
            subset_fallbacks: buffer.counters().subset_fallbacks,
            window_mean: self.tracker.window_mean().unwrap_or(episode_return),
        }))
    }
}
