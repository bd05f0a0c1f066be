use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{importance_weights, PerConfig, ReplayBuffer, ReplayError, ReplaySampler, SampledBatch};

/// Rank-based prioritized replay: slots ranked by `|td_error|` (descending,
/// older first on ties) are drawn with `P(rank) ∝ rank^-alpha`.
///
/// The rank order is rebuilt by a full sort whenever the buffer size changed or
/// `rank_refresh_interval` stores happened since the last sort. Between sorts,
/// a slot overwritten in place keeps the rank of the transition it replaced.
#[derive(Clone, Debug)]
pub struct PerRank {
    config: PerConfig,
    rng: ChaCha8Rng,
    /// Slots in rank order (rank 1 first).
    order: Vec<usize>,
    /// `probabilities[r]` is the probability of rank `r + 1`.
    probabilities: Vec<f64>,
    cdf: Vec<f64>,
    /// First rank index of each of the `batch_size` equal-mass strata.
    stratum_starts: Vec<usize>,
    stores_since_sort: u64,
    samples_drawn: u64,
}

impl PerRank {
    pub fn new(config: PerConfig, rng: ChaCha8Rng) -> Result<Self, ReplayError> {
        config.validate()?;
        Ok(Self {
            config,
            rng,
            order: Vec::new(),
            probabilities: Vec::new(),
            cdf: Vec::new(),
            stratum_starts: Vec::new(),
            stores_since_sort: 0,
            samples_drawn: 0,
        })
    }

    pub fn seeded(config: PerConfig, seed: u64) -> Result<Self, ReplayError> {
        Self::new(config, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Power-law probabilities `rank^-alpha / Σ_k k^-alpha` for `n` ranks.
    pub fn rank_probabilities(n: usize, alpha: f64) -> Vec<f64> {
        let raw: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    /// Re-sorts the rank order now.
    pub fn refresh(&mut self, buffer: &ReplayBuffer) {
        let mut order: Vec<usize> = (0..buffer.len()).collect();
        order.sort_by(|&a, &b| {
            let (ta, tb) = (buffer.get(a).td_error.abs(), buffer.get(b).td_error.abs());
            tb.total_cmp(&ta).then(buffer.seq(a).cmp(&buffer.seq(b)))
        });
        if order.len() != self.probabilities.len() {
            self.probabilities = Self::rank_probabilities(order.len(), self.config.alpha);
            let mut acc = 0.0;
            self.cdf = self
                .probabilities
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            if let Some(last) = self.cdf.last_mut() {
                *last = 1.0;
            }
            self.stratum_starts.clear();
        }
        self.order = order;
        self.stores_since_sort = 0;
    }

    fn needs_refresh(&self, buffer: &ReplayBuffer) -> bool {
        self.order.len() != buffer.len() || self.stores_since_sort >= self.config.rank_refresh_interval
    }

    fn ensure_strata(&mut self, batch_size: usize) {
        if self.stratum_starts.len() == batch_size + 1 {
            return;
        }
        self.stratum_starts = (0..batch_size)
            .map(|k| {
                let u = k as f64 / batch_size as f64;
                self.cdf.partition_point(|&c| c <= u)
            })
            .chain(std::iter::once(self.cdf.len() - 1))
            .collect();
    }

    /// Slots in rank order with their sampling probabilities, after a refresh if due.
    pub fn ranked(&mut self, buffer: &ReplayBuffer) -> Vec<(usize, f64)> {
        if self.needs_refresh(buffer) {
            self.refresh(buffer);
        }
        self.order.iter().copied().zip(self.probabilities.iter().copied()).collect()
    }

    pub fn sample_with_beta(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        beta: f64,
    ) -> Result<SampledBatch, ReplayError> {
        if buffer.is_empty() {
            return Err(ReplayError::Empty);
        }
        if self.needs_refresh(buffer) {
            self.refresh(buffer);
        }
        self.ensure_strata(batch_size);
        let n = self.order.len();
        let mut slots = Vec::with_capacity(batch_size);
        let mut probs = Vec::with_capacity(batch_size);
        for k in 0..batch_size {
            let u = (k as f64 + self.rng.random::<f64>()) / batch_size as f64;
            let (lo, hi) = (self.stratum_starts[k], self.stratum_starts[k + 1]);
            let rank = (lo + self.cdf[lo..=hi].partition_point(|&c| c <= u)).min(n - 1);
            slots.push(self.order[rank]);
            probs.push(self.probabilities[rank]);
        }
        let weights = importance_weights(&probs, n, beta);
        Ok(SampledBatch::new(buffer, slots, Some(weights)))
    }
}

impl ReplaySampler for PerRank {
    fn name(&self) -> &'static str {
        "per_rank"
    }

    fn on_store(&mut self, _buffer: &mut ReplayBuffer, _slot: usize, _global_step: u64) -> Result<(), ReplayError> {
        self.stores_since_sort += 1;
        Ok(())
    }

    fn sample(&mut self, buffer: &mut ReplayBuffer, batch_size: usize) -> Result<SampledBatch, ReplayError> {
        let beta = self.config.beta(self.samples_drawn);
        let batch = self.sample_with_beta(buffer, batch_size, beta)?;
        self.samples_drawn += 1;
        Ok(batch)
    }
}
