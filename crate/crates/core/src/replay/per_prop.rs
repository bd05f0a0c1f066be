use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    importance_weights, PerConfig, ReplayBuffer, ReplayError, ReplaySampler, SampledBatch, SumTree,
};

/// Proportional prioritized replay: `P(i) ∝ priority_i^alpha`, drawn by
/// stratified inverse-CDF descent on a sum tree.
#[derive(Clone, Debug)]
pub struct PerProportional {
    config: PerConfig,
    tree: SumTree,
    rng: ChaCha8Rng,
    samples_drawn: u64,
}

impl PerProportional {
    pub fn new(capacity: usize, config: PerConfig, rng: ChaCha8Rng) -> Result<Self, ReplayError> {
        config.validate()?;
        if capacity == 0 {
            return Err(ReplayError::Config("capacity must be positive".into()));
        }
        Ok(Self {
            config,
            tree: SumTree::new(capacity),
            rng,
            samples_drawn: 0,
        })
    }

    pub fn seeded(capacity: usize, config: PerConfig, seed: u64) -> Result<Self, ReplayError> {
        Self::new(capacity, config, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn config(&self) -> &PerConfig {
        &self.config
    }

    /// Copies `slot`'s priority into its leaf as `priority^alpha`.
    pub fn sync_slot(&mut self, buffer: &ReplayBuffer, slot: usize) {
        let mass = buffer.get(slot).per_priority.powf(self.config.alpha);
        self.tree.set(slot, mass);
    }

    /// Sampling probability of `slot` under the current leaf masses.
    pub fn probability(&self, slot: usize) -> f64 {
        self.tree.get(slot) / self.tree.total()
    }

    /// Draws `batch_size` slots, one from each equal-mass stratum of the CDF.
    pub fn sample_with_beta(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        beta: f64,
    ) -> Result<SampledBatch, ReplayError> {
        if buffer.is_empty() {
            return Err(ReplayError::Empty);
        }
        let total = self.tree.total();
        if !(total.is_finite() && total > 0.0) {
            return Err(ReplayError::DegeneratePriorities { total });
        }
        let segment = total / batch_size as f64;
        let mut slots = Vec::with_capacity(batch_size);
        let mut probs = Vec::with_capacity(batch_size);
        for k in 0..batch_size {
            let u = (k as f64 + self.rng.random::<f64>()) * segment;
            let slot = self.tree.find_prefix(u);
            slots.push(slot);
            probs.push(self.tree.get(slot) / total);
        }
        let weights = importance_weights(&probs, buffer.len(), beta);
        Ok(SampledBatch::new(buffer, slots, Some(weights)))
    }
}

impl ReplaySampler for PerProportional {
    fn name(&self) -> &'static str {
        "per_prop"
    }

    fn on_store(&mut self, buffer: &mut ReplayBuffer, slot: usize, _global_step: u64) -> Result<(), ReplayError> {
        self.sync_slot(buffer, slot);
        Ok(())
    }

    fn sample(&mut self, buffer: &mut ReplayBuffer, batch_size: usize) -> Result<SampledBatch, ReplayError> {
        let beta = self.config.beta(self.samples_drawn);
        let batch = self.sample_with_beta(buffer, batch_size, beta)?;
        self.samples_drawn += 1;
        Ok(batch)
    }

    fn update_priorities(
        &mut self,
        buffer: &mut ReplayBuffer,
        batch: &SampledBatch,
        td_errors: &[f64],
        _global_step: u64,
    ) -> Result<usize, ReplayError> {
        let updated = buffer.update_priorities(&batch.slots, &batch.seqs, td_errors)?;
        for &slot in &updated {
            self.sync_slot(buffer, slot);
        }
        Ok(updated.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::Transition;

    fn filled(priorities: &[f64], alpha: f64) -> (ReplayBuffer, PerProportional) {
        let mut buf = ReplayBuffer::new(priorities.len(), 1, 1).unwrap();
        let cfg = PerConfig {
            alpha,
            ..PerConfig::default()
        };
        let mut per = PerProportional::seeded(priorities.len(), cfg, 3).unwrap();
        for (k, &p) in priorities.iter().enumerate() {
            let out = buf
                .store(Transition::new(vec![0.0], vec![0.0], 0.0, vec![0.0], false, k as u64 + 1))
                .unwrap();
            buf.set_per_priority(out.slot, p);
            per.on_store(&mut buf, out.slot, k as u64 + 1).unwrap();
        }
        (buf, per)
    }

    #[test]
    fn point_mass() {
        let (mut buf, mut per) = filled(&[1.0, 0.0, 0.0, 0.0], 1.0);
        for _ in 0..50 {
            let batch = per.sample(&mut buf, 64).unwrap();
            assert!(batch.slots.iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn frequencies_follow_priorities() {
        let (mut buf, mut per) = filled(&[1.0, 3.0], 1.0);
        let mut hits = [0usize; 2];
        let mut draws = 0;
        while draws < 100_000 {
            // Batch of 1 keeps draws independent of stratification.
            let batch = per.sample(&mut buf, 1).unwrap();
            hits[batch.slots[0]] += 1;
            draws += 1;
        }
        let f0 = hits[0] as f64 / draws as f64;
        let f1 = hits[1] as f64 / draws as f64;
        assert!((f0 - 0.25).abs() / 0.25 < 0.02, "{f0}");
        assert!((f1 - 0.75).abs() / 0.75 < 0.02, "{f1}");
    }

    #[test]
    fn symmetric_weights_are_one() {
        let (buf, mut per) = filled(&[2.0, 2.0], 1.0);
        let batch = per.sample_with_beta(&buf, 8, 1.0).unwrap();
        assert!(batch.weights.unwrap().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn zero_mass_is_degenerate() {
        let (mut buf, mut per) = filled(&[0.0, 0.0], 1.0);
        assert!(matches!(
            per.sample(&mut buf, 4),
            Err(ReplayError::DegeneratePriorities { .. })
        ));
    }

    #[test]
    fn update_sets_leaf_to_epsilon_power() {
        let (mut buf, mut per) = filled(&[1.0, 1.0, 1.0, 1.0, 1.0], 1.0);
        let before = per.tree().total();
        let batch = SampledBatch::new(&buf, vec![3], None);
        per.update_priorities(&mut buf, &batch, &[0.0], 0).unwrap();
        assert!((per.tree().get(3) - 0.01).abs() < 1e-15);
        assert!((per.tree().total() - (before - 1.0 + 0.01)).abs() < 1e-12);
    }

    #[test]
    fn weights_in_unit_interval() {
        let (mut buf, mut per) = filled(&[0.1, 5.0, 2.0, 0.7, 3.3, 0.01], 0.6);
        for _ in 0..100 {
            let batch = per.sample(&mut buf, 16).unwrap();
            for w in batch.weights.unwrap() {
                assert!(w > 0.0 && w <= 1.0);
            }
        }
    }
}
