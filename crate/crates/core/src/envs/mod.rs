//! Deterministic continuous-control tasks with an episodic reset/step interface.

mod pendulum;
mod point_reacher;

pub use pendulum::Pendulum;
pub use point_reacher::PointReacher;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    /// Clamps each action component into its bounds.
    pub fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f64>,
    pub reward: f64,
    /// Genuine terminal state; the critic must not bootstrap through it.
    pub done: bool,
    /// Episode cut by the time limit.
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("step called after the episode ended; call reset first")]
    EpisodeOver,
    #[error("step called before reset")]
    NotReset,
    #[error("action has {got} components, environment expects {expected}")]
    ActionDim { expected: usize, got: usize },
    #[error("action contains a non-finite component")]
    NonFiniteAction,
}

/// Episodic environment: `reset` then `step` until `done` or `truncated`.
pub trait Environment: Send {
    fn name(&self) -> &'static str;

    fn spec(&self) -> EnvSpec;

    /// Starts a new episode from the initial-state distribution seeded by `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
}

pub(crate) fn check_action(spec: &EnvSpec, action: &[f64]) -> Result<Vec<f64>, EnvError> {
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDim {
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction);
    }
    Ok(spec.clamp_action(action))
}

/// Episode progress shared by the built-in tasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) enum Phase {
    #[default]
    Fresh,
    Running {
        steps: usize,
    },
    Over,
}
