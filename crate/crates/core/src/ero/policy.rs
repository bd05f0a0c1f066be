use crate::nn::{Activation, Adam, GradTape, Matrix, Mlp, NnError};

use super::{EroConfig, FeatureNormalizer, TransitionFeatures, FEATURE_DIM};

/// Probabilities are clamped into `[LOG_CLAMP, 1 - LOG_CLAMP]` inside the logs.
pub const LOG_CLAMP: f64 = 1e-8;

/// Score network `φ(f | θ)` with its optimizer and feature normalizer.
#[derive(Clone, Debug)]
pub struct EroPolicy {
    net: Mlp,
    optimizer: Adam,
    pub normalizer: FeatureNormalizer,
}

impl EroPolicy {
    pub fn new(config: &EroConfig, seed: u64) -> Result<Self, NnError> {
        let mut sizes = vec![FEATURE_DIM];
        sizes.extend(&config.hidden_sizes);
        sizes.push(1);
        let mut activations = vec![config.hidden_activation; config.hidden_sizes.len()];
        activations.push(Activation::Sigmoid);
        let net = Mlp::with_output_bound(&sizes, &activations, config.output_init_bound, seed)?;
        Ok(Self::from_net(net, config.learning_rate))
    }

    /// Wraps an existing sigmoid-headed network.
    pub fn from_net(net: Mlp, learning_rate: f64) -> Self {
        let optimizer = Adam::new(&net, learning_rate);
        Self {
            net,
            optimizer,
            normalizer: FeatureNormalizer::default(),
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Normalized network inputs, one row per feature vector.
    pub fn inputs(&self, features: &[TransitionFeatures]) -> Matrix {
        let mut data = Vec::with_capacity(features.len() * FEATURE_DIM);
        for f in features {
            data.extend_from_slice(&self.normalizer.normalize(f));
        }
        Matrix::from_vec(features.len(), FEATURE_DIM, data)
    }

    /// Priority scores `λ_i ∈ (0, 1)`.
    pub fn score(&self, features: &[TransitionFeatures]) -> Result<Vec<f64>, NnError> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        self.score_inputs(&self.inputs(features))
    }

    pub fn score_inputs(&self, inputs: &Matrix) -> Result<Vec<f64>, NnError> {
        Ok(self.net.predict(inputs)?.into_vec())
    }

    /// Applies one Adam step ascending `r^r · Σ_j log P(I_j | φ_j)` over the batch.
    /// Returns the surrogate loss (the negated objective) before the step.
    pub fn update(&mut self, inputs: &Matrix, mask_bits: &[bool], replay_reward: f64) -> Result<f64, NnError> {
        let (loss, tape) = surrogate_gradient(&self.net, inputs, mask_bits, replay_reward)?;
        self.optimizer.step(&mut self.net, &tape)?;
        Ok(loss)
    }
}

/// `Σ_j [I_j log φ_j + (1 − I_j) log(1 − φ_j)]` for the realized mask bits.
pub fn mask_log_likelihood(scores: &[f64], mask_bits: &[bool]) -> f64 {
    scores
        .iter()
        .zip(mask_bits)
        .map(|(&phi, &bit)| {
            let phi = phi.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            if bit {
                phi.ln()
            } else {
                (1.0 - phi).ln()
            }
        })
        .sum()
}

/// Surrogate loss `−r^r · Σ_j log P(I_j | φ_j)` for an arbitrary score network.
pub fn surrogate_loss(net: &Mlp, inputs: &Matrix, mask_bits: &[bool], replay_reward: f64) -> Result<f64, NnError> {
    let scores = net.predict(inputs)?;
    Ok(-replay_reward * mask_log_likelihood(scores.as_slice(), mask_bits))
}

/// Surrogate loss and its exact parameter gradient.
pub fn surrogate_gradient(
    net: &Mlp,
    inputs: &Matrix,
    mask_bits: &[bool],
    replay_reward: f64,
) -> Result<(f64, GradTape), NnError> {
    if mask_bits.len() != inputs.rows() {
        return Err(NnError::Shape {
            what: "mask bits per input row",
            expected: inputs.rows(),
            got: mask_bits.len(),
        });
    }
    let cache = net.forward(inputs)?;
    let scores = cache.output().as_slice();
    let loss = -replay_reward * mask_log_likelihood(scores, mask_bits);
    let grad: Vec<f64> = scores
        .iter()
        .zip(mask_bits)
        .map(|(&phi, &bit)| {
            if !(LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&phi) {
                return 0.0;
            }
            let dlog = if bit { 1.0 / phi } else { -1.0 / (1.0 - phi) };
            -replay_reward * dlog
        })
        .collect();
    let tape = net.backward(&cache, &Matrix::from_vec(inputs.rows(), 1, grad))?;
    Ok((loss, tape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient, DEFAULT_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(seed: u64) -> (Mlp, Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(&[3, 8, 8, 1], &[Activation::Tanh, Activation::Tanh, Activation::Sigmoid], seed).unwrap();
        let rows = 6;
        let inputs = Matrix::from_vec(rows, 3, (0..rows * 3).map(|_| rng.random_range(-1.0..1.0)).collect());
        let bits = (0..rows).map(|_| rng.random::<bool>()).collect();
        (net, inputs, bits)
    }

    #[test]
    fn zero_output_layer_scores_one_half() {
        let cfg = EroConfig {
            output_init_bound: 0.0,
            ..EroConfig::default()
        };
        let policy = EroPolicy::new(&cfg, 0).unwrap();
        let f = TransitionFeatures {
            reward: 3.0,
            td_error: -1.0,
            timestep_ratio: 0.2,
        };
        assert_eq!(policy.score(&[f, f]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn default_scores_start_near_one_half() {
        let policy = EroPolicy::new(&EroConfig::default(), 3).unwrap();
        let f = TransitionFeatures {
            reward: 1.0,
            td_error: 0.5,
            timestep_ratio: 0.9,
        };
        let s = policy.score(&[f]).unwrap()[0];
        assert!((s - 0.5).abs() < 0.05, "{s}");
    }

    #[test]
    fn scores_are_monotone_in_pre_activation() {
        let mut net = Mlp::zeroed(&[3, 1], &[Activation::Sigmoid]).unwrap();
        net.params_mut()[0] = 1.0;
        let policy = EroPolicy::from_net(net, 1e-4);
        let make = |r| TransitionFeatures {
            reward: r,
            td_error: 0.0,
            timestep_ratio: 0.0,
        };
        let s = policy.score(&[make(-1.0), make(0.0), make(2.0)]).unwrap();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let (net, inputs, bits) = random_case(seed);
            let (_, tape) = surrogate_gradient(&net, &inputs, &bits, 0.7).unwrap();
            let numeric = numeric_gradient(&net, DEFAULT_STEP, |probe| {
                surrogate_loss(probe, &inputs, &bits, 0.7).unwrap()
            });
            let (err, _) = max_relative_error(&tape.params, &numeric);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_replay_reward_leaves_parameters() {
        let (net, inputs, bits) = random_case(1);
        let mut policy = EroPolicy::from_net(net.clone(), 1e-4);
        policy.update(&inputs, &bits, 0.0).unwrap();
        assert_eq!(policy.net().params(), net.params());
    }

    #[test]
    fn sign_of_replay_reward_sets_direction() {
        let (net, _, _) = random_case(2);
        let input = Matrix::from_rows(&[[0.3, -0.2, 0.8]]);
        let before = net.predict(&input).unwrap().as_slice()[0];

        let mut up = EroPolicy::from_net(net.clone(), 1e-4);
        up.update(&input, &[true], 1.0).unwrap();
        assert!(up.net().predict(&input).unwrap().as_slice()[0] > before);

        let mut down = EroPolicy::from_net(net, 1e-4);
        down.update(&input, &[true], -1.0).unwrap();
        assert!(down.net().predict(&input).unwrap().as_slice()[0] < before);
    }
}
