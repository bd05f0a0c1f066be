use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ReplayBuffer, ReplayError, ReplaySampler, SampledBatch};

/// Uniform sampling with replacement over the whole buffer.
#[derive(Clone, Debug)]
pub struct UniformSampler {
    rng: ChaCha8Rng,
}

impl UniformSampler {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    pub fn seeded(seed: u64) -> Self {
        Self::new(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl ReplaySampler for UniformSampler {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn sample(&mut self, buffer: &mut ReplayBuffer, batch_size: usize) -> Result<SampledBatch, ReplayError> {
        let slots = buffer.sample_uniform(batch_size, &mut self.rng)?;
        Ok(SampledBatch::new(buffer, slots, None))
    }
}
