use crate::envs::EnvSpec;
use crate::nn::{Activation, Adam, GradTape, Matrix, Mlp, NnError};
use crate::replay::{ReplayBuffer, ReplaySampler, SampledBatch};

use super::{DdpgConfig, DdpgError, OuNoise};

/// Columns of a sampled mini-batch, ready for the networks.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainBatch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub dones: Vec<bool>,
    /// Per-sample loss weights; `None` means every weight is 1.
    pub weights: Option<Vec<f64>>,
}

impl TrainBatch {
    pub fn gather(buffer: &ReplayBuffer, slots: &[usize], weights: Option<Vec<f64>>) -> Self {
        let (od, ad) = (buffer.obs_dim(), buffer.action_dim());
        let n = slots.len();
        let mut states = Vec::with_capacity(n * od);
        let mut actions = Vec::with_capacity(n * ad);
        let mut next_states = Vec::with_capacity(n * od);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for &slot in slots {
            let t = buffer.get(slot);
            states.extend_from_slice(&t.state);
            actions.extend_from_slice(&t.action);
            next_states.extend_from_slice(&t.next_state);
            rewards.push(t.reward);
            dones.push(t.done);
        }
        Self {
            states: Matrix::from_vec(n, od, states),
            actions: Matrix::from_vec(n, ad, actions),
            rewards,
            next_states: Matrix::from_vec(n, od, next_states),
            dones,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Affine map from the actor head's output to the action space:
/// `a = offset + scale ⊙ head`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionMap {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionMap {
    /// Maps a tanh head in `[-1, 1]` onto `[low, high]`.
    pub fn for_spec(spec: &EnvSpec) -> Self {
        let scale = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(l, h)| 0.5 * (h - l))
            .collect();
        let offset = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(l, h)| 0.5 * (h + l))
            .collect();
        Self {
            scale,
            offset,
            low: spec.action_low.clone(),
            high: spec.action_high.clone(),
        }
    }

    /// Identity map without clamping.
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
            low: vec![f64::NEG_INFINITY; dim],
            high: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    fn apply(&self, head: &Matrix) -> Matrix {
        let mut out = head.clone();
        for r in 0..out.rows() {
            for (j, a) in out.row_mut(r).iter_mut().enumerate() {
                *a = self.offset[j] + self.scale[j] * *a;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticStats {
    /// Mean of the (weighted) squared TD errors before the step.
    pub loss: f64,
}

/// Outcome of one [`DdpgAgent::train_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub td_errors: Vec<f64>,
    pub batch: SampledBatch,
}

/// Actor, critic, their target copies, and one Adam state per online network.
#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    action_map: ActionMap,
    gamma: f64,
    tau: f64,
}

impl DdpgAgent {
    pub fn new(spec: &EnvSpec, config: &DdpgConfig, seed: u64) -> Result<Self, DdpgError> {
        config.validate()?;
        let hidden = vec![config.hidden_activation; config.hidden_sizes.len()];

        let mut actor_sizes = vec![spec.obs_dim];
        actor_sizes.extend(&config.hidden_sizes);
        actor_sizes.push(spec.action_dim);
        let mut actor_acts = hidden.clone();
        actor_acts.push(Activation::Tanh);

        let mut critic_sizes = vec![spec.obs_dim + spec.action_dim];
        critic_sizes.extend(&config.hidden_sizes);
        critic_sizes.push(1);
        let mut critic_acts = hidden;
        critic_acts.push(Activation::Linear);

        let actor = Mlp::with_output_bound(&actor_sizes, &actor_acts, config.output_init_bound, seed)?;
        let critic = Mlp::with_output_bound(
            &critic_sizes,
            &critic_acts,
            config.output_init_bound,
            seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
        )?;
        Self::from_networks(actor, critic, ActionMap::for_spec(spec), config)
    }

    /// Builds an agent around explicit networks; targets start as exact copies.
    pub fn from_networks(
        actor: Mlp,
        critic: Mlp,
        action_map: ActionMap,
        config: &DdpgConfig,
    ) -> Result<Self, DdpgError> {
        config.validate()?;
        if actor.output_dim() != action_map.dim() {
            return Err(NnError::Shape {
                what: "actor output width",
                expected: action_map.dim(),
                got: actor.output_dim(),
            }
            .into());
        }
        if critic.input_dim() != actor.input_dim() + actor.output_dim() || critic.output_dim() != 1 {
            return Err(NnError::Shape {
                what: "critic input width",
                expected: actor.input_dim() + actor.output_dim(),
                got: critic.input_dim(),
            }
            .into());
        }
        Ok(Self {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opt: Adam::new(&critic, config.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            action_map,
            gamma: config.gamma,
            tau: config.tau,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn action_map(&self) -> &ActionMap {
        &self.action_map
    }

    /// `μ(s)` for a batch of states.
    pub fn policy_actions(&self, states: &Matrix) -> Result<Matrix, NnError> {
        Ok(self.action_map.apply(&self.actor.predict(states)?))
    }

    /// Exploration action: `clamp(μ(s) + x_ou)`, advancing the noise by one step.
    pub fn act(&self, obs: &[f64], noise: Option<&mut OuNoise>) -> Result<Vec<f64>, NnError> {
        let mut action = self.policy_actions(&Matrix::row_vector(obs))?.into_vec();
        if let Some(noise) = noise {
            for (a, x) in action.iter_mut().zip(noise.sample()) {
                *a += x;
            }
        }
        for (j, a) in action.iter_mut().enumerate() {
            *a = a.clamp(self.action_map.low[j], self.action_map.high[j]);
        }
        Ok(action)
    }

    /// `Q(s, a)` for a batch.
    pub fn q_values(&self, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>, NnError> {
        Ok(self.critic.predict(&states.hconcat(actions))?.into_vec())
    }

    /// `y = r + γ(1 − done)Q′(s′, μ′(s′))` from the target networks.
    pub fn critic_targets(&self, batch: &TrainBatch) -> Result<Vec<f64>, NnError> {
        let next_actions = self.action_map.apply(&self.actor_target.predict(&batch.next_states)?);
        let next_q = self.critic_target.predict(&batch.next_states.hconcat(&next_actions))?;
        Ok(batch
            .rewards
            .iter()
            .zip(&batch.dones)
            .zip(next_q.as_slice())
            .map(|((&r, &done), &q)| if done { r } else { r + self.gamma * q })
            .collect())
    }

    /// One Adam step on the critic. Returns the pre-step loss and `δ = y − Q(s, a)`.
    pub fn critic_update(&mut self, batch: &TrainBatch) -> Result<(CriticStats, Vec<f64>), DdpgError> {
        let targets = self.critic_targets(batch)?;
        let inputs = batch.states.hconcat(&batch.actions);
        let (loss, tape, td) = critic_gradient(&self.critic, &inputs, &targets, batch.weights.as_deref())?;
        if !loss.is_finite() {
            return Err(DdpgError::NonFinite { what: "critic loss" });
        }
        self.critic_opt.step(&mut self.critic, &tape)?;
        Ok((CriticStats { loss }, td))
    }

    /// One Adam step on the actor ascending `mean Q(s, μ(s))` with the critic held fixed.
    /// Returns the objective before the step.
    pub fn actor_update(&mut self, batch: &TrainBatch) -> Result<f64, DdpgError> {
        let (objective, tape) = actor_gradient(&self.actor, &self.critic, &self.action_map, &batch.states)?;
        if !objective.is_finite() {
            return Err(DdpgError::NonFinite { what: "actor objective" });
        }
        self.actor_opt.step(&mut self.actor, &tape)?;
        Ok(objective)
    }

    /// `θ′ ← τθ + (1 − τ)θ′` for both target networks.
    pub fn soft_update(&mut self) -> Result<(), NnError> {
        self.actor_target.blend_from(&self.actor, self.tau)?;
        self.critic_target.blend_from(&self.critic, self.tau)
    }

    /// Samples a batch, updates critic then actor, and blends the targets.
    /// Importance weights are applied whenever the sampler supplies them.
    /// The caller feeds `td_errors` back to the sampler.
    pub fn train_step(
        &mut self,
        sampler: &mut dyn ReplaySampler,
        buffer: &mut ReplayBuffer,
        batch_size: usize,
    ) -> Result<TrainOutcome, DdpgError> {
        let sampled = sampler.sample(buffer, batch_size)?;
        let batch = TrainBatch::gather(buffer, &sampled.slots, sampled.weights.clone());
        let (stats, td_errors) = self.critic_update(&batch)?;
        let actor_objective = self.actor_update(&batch)?;
        self.soft_update()?;
        Ok(TrainOutcome {
            critic_loss: stats.loss,
            actor_objective,
            td_errors,
            batch: sampled,
        })
    }
}

/// Critic loss `mean_t w_t (y_t − Q(s_t, a_t))²`, its parameter gradient, and the TD errors.
pub fn critic_gradient(
    critic: &Mlp,
    inputs: &Matrix,
    targets: &[f64],
    weights: Option<&[f64]>,
) -> Result<(f64, GradTape, Vec<f64>), NnError> {
    let n = inputs.rows();
    if targets.len() != n {
        return Err(NnError::Shape {
            what: "critic targets",
            expected: n,
            got: targets.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(NnError::Shape {
                what: "importance weights",
                expected: n,
                got: w.len(),
            });
        }
    }
    let cache = critic.forward(inputs)?;
    let q = cache.output().as_slice();
    let td: Vec<f64> = targets.iter().zip(q).map(|(y, q)| y - q).collect();
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let inv_n = 1.0 / n as f64;
    let loss = td.iter().enumerate().map(|(i, d)| weight(i) * d * d).sum::<f64>() * inv_n;
    let grad: Vec<f64> = td
        .iter()
        .enumerate()
        .map(|(i, d)| -2.0 * weight(i) * d * inv_n)
        .collect();
    let tape = critic.backward(&cache, &Matrix::from_vec(n, 1, grad))?;
    Ok((loss, tape, td))
}

/// Critic loss alone, for finite-difference checks.
pub fn critic_loss(critic: &Mlp, inputs: &Matrix, targets: &[f64], weights: Option<&[f64]>) -> Result<f64, NnError> {
    let q = critic.predict(inputs)?;
    let n = inputs.rows() as f64;
    Ok(q.as_slice()
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (q, y))| weights.map_or(1.0, |w| w[i]) * (y - q).powi(2))
        .sum::<f64>()
        / n)
}

/// `J = mean_t Q(s_t, μ(s_t))` and the gradient of `−J` with respect to the actor.
pub fn actor_gradient(
    actor: &Mlp,
    critic: &Mlp,
    action_map: &ActionMap,
    states: &Matrix,
) -> Result<(f64, GradTape), NnError> {
    let n = states.rows();
    let obs_dim = states.cols();
    let actor_cache = actor.forward(states)?;
    let actions = action_map.apply(actor_cache.output());
    let critic_cache = critic.forward(&states.hconcat(&actions))?;
    let objective = critic_cache.output().as_slice().iter().sum::<f64>() / n as f64;

    let dq = Matrix::from_vec(n, 1, vec![-1.0 / n as f64; n]);
    let critic_tape = critic.backward(&critic_cache, &dq)?;
    let mut d_head = critic_tape.input.columns(obs_dim, obs_dim + action_map.dim());
    for r in 0..n {
        for (j, g) in d_head.row_mut(r).iter_mut().enumerate() {
            *g *= action_map.scale[j];
        }
    }
    let tape = actor.backward(&actor_cache, &d_head)?;
    Ok((objective, tape))
}

/// `−J` alone, for finite-difference checks.
pub fn actor_loss(actor: &Mlp, critic: &Mlp, action_map: &ActionMap, states: &Matrix) -> Result<f64, NnError> {
    let actions = action_map.apply(&actor.predict(states)?);
    let q = critic.predict(&states.hconcat(&actions))?;
    Ok(-q.as_slice().iter().sum::<f64>() / states.rows() as f64)
}
