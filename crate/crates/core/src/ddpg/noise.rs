use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Ornstein-Uhlenbeck exploration noise with unit time step:
/// `x ← x + θ(μ − x) + σ·ξ`, `ξ ~ N(0, 1)` per action dimension.
#[derive(Clone, Debug)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    state: Vec<f64>,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64, rng: ChaCha8Rng) -> Self {
        Self {
            theta,
            sigma,
            mu: 0.0,
            state: vec![0.0; dim],
            rng,
        }
    }

    pub fn seeded(dim: usize, theta: f64, sigma: f64, seed: u64) -> Self {
        Self::new(dim, theta, sigma, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.fill(self.mu);
    }

    /// Advances one step using the supplied standard-normal draws.
    pub fn advance_with(&mut self, draws: &[f64]) -> &[f64] {
        assert_eq!(draws.len(), self.state.len(), "one draw per action dimension");
        for (x, &xi) in self.state.iter_mut().zip(draws) {
            *x += self.theta * (self.mu - *x) + self.sigma * xi;
        }
        &self.state
    }

    /// Advances one step with fresh draws from the internal generator.
    pub fn sample(&mut self) -> &[f64] {
        let draws: Vec<f64> = (0..self.state.len())
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect();
        self.advance_with(&draws)
    }
}
