use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvError, EnvSpec, Environment, Phase, StepResult};

const GOAL: f64 = 0.8;
const GOAL_TOLERANCE: f64 = 0.02;
const DT: f64 = 0.05;
const DAMPING: f64 = 0.05;
const MAX_SPEED: f64 = 2.0;
const MAX_STEPS: usize = 200;

/// A damped point mass on `[-1, 1]` that must be pushed onto the goal at 0.8.
#[derive(Clone, Debug, Default)]
pub struct PointReacher {
    position: f64,
    velocity: f64,
    phase: Phase,
}

impl PointReacher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn goal() -> f64 {
        GOAL
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) -> Vec<f64> {
        self.position = position.clamp(-1.0, 1.0);
        self.velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.phase = Phase::Running { steps: 0 };
        self.observation()
    }

    pub fn state(&self) -> (f64, f64) {
        (self.position, self.velocity)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }
}

impl Environment for PointReacher {
    fn name(&self) -> &'static str {
        "point_reacher"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 2,
            action_dim: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let position = rng.random_range(-1.0..-0.5);
        self.set_state(position, 0.0)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let steps = match self.phase {
            Phase::Fresh => return Err(EnvError::NotReset),
            Phase::Over => return Err(EnvError::EpisodeOver),
            Phase::Running { steps } => steps + 1,
        };
        let u = check_action(&self.spec(), action)?[0];

        self.velocity = (self.velocity * (1.0 - DAMPING) + u * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.position = (self.position + self.velocity * DT).clamp(-1.0, 1.0);

        let distance = (self.position - GOAL).abs();
        let done = distance < GOAL_TOLERANCE;
        let truncated = !done && steps >= MAX_STEPS;
        self.phase = if done || truncated {
            Phase::Over
        } else {
            Phase::Running { steps }
        };
        Ok(StepResult {
            next_obs: self.observation(),
            reward: -distance,
            done,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_constants() {
        let spec = PointReacher::new().spec();
        assert_eq!((spec.obs_dim, spec.action_dim), (2, 1));
        assert_eq!((spec.action_low[0], spec.action_high[0]), (-1.0, 1.0));
        assert_eq!(spec.max_episode_steps, 200);
    }

    #[test]
    fn reset_starts_at_rest_left_of_goal() {
        let mut env = PointReacher::new();
        for seed in 0..100 {
            let obs = env.reset(seed);
            assert_eq!(obs[1], 0.0);
            assert!((-1.0..-0.5).contains(&obs[0]));
        }
        assert_eq!(env.reset(3), env.reset(3));
    }

    #[test]
    fn reaching_the_goal_terminates() {
        let mut env = PointReacher::new();
        env.set_state(0.8, 0.0);
        let r = env.step(&[0.01]).unwrap();
        assert!(r.done && !r.truncated);
        assert!(r.reward > -GOAL_TOLERANCE && r.reward <= 0.0);
        assert_eq!(env.step(&[0.0]), Err(EnvError::EpisodeOver));
    }

    #[test]
    fn dynamics_follow_damped_update() {
        let mut env = PointReacher::new();
        env.set_state(-0.5, 0.2);
        let r = env.step(&[1.0]).unwrap();
        let v = 0.2 * 0.95 + 0.05;
        let p = -0.5 + v * 0.05;
        assert_eq!(env.state(), (p, v));
        assert_eq!(r.reward, -(p - 0.8f64).abs());
    }

    #[test]
    fn idle_episode_truncates() {
        let mut env = PointReacher::new();
        env.reset(0);
        for k in 1..=200 {
            let r = env.step(&[0.0]).unwrap();
            assert!(!r.done);
            assert_eq!(r.truncated, k == 200);
        }
    }
}
