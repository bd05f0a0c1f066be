use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvError, EnvSpec, Environment, Phase, StepResult};

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_TORQUE: f64 = 2.0;
const MAX_SPEED: f64 = 8.0;
const MAX_STEPS: usize = 200;

/// Torque-limited pendulum swing-up. `theta = 0` is upright.
#[derive(Clone, Debug, Default)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    phase: Phase,
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

impl Pendulum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Places the pendulum in an explicit state and starts a fresh episode.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) -> Vec<f64> {
        self.theta = theta;
        self.theta_dot = theta_dot.clamp(-MAX_SPEED, MAX_SPEED);
        self.phase = Phase::Running { steps: 0 };
        self.observation()
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Environment for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 3,
            action_dim: 1,
            action_low: vec![-MAX_TORQUE],
            action_high: vec![MAX_TORQUE],
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..1.0);
        self.set_state(theta, theta_dot)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let steps = match self.phase {
            Phase::Fresh => return Err(EnvError::NotReset),
            Phase::Over => return Err(EnvError::EpisodeOver),
            Phase::Running { steps } => steps + 1,
        };
        let u = check_action(&self.spec(), action)?[0];

        let angle = wrap_angle(self.theta);
        let reward = -(angle * angle + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;

        let truncated = steps >= MAX_STEPS;
        self.phase = if truncated {
            Phase::Over
        } else {
            Phase::Running { steps }
        };
        Ok(StepResult {
            next_obs: self.observation(),
            reward,
            done: false,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_constants() {
        let spec = Pendulum::new().spec();
        assert_eq!((spec.obs_dim, spec.action_dim), (3, 1));
        assert_eq!((spec.action_low[0], spec.action_high[0]), (-2.0, 2.0));
        assert_eq!(spec.max_episode_steps, 200);
    }

    #[test]
    fn reset_is_seeded_and_on_the_circle() {
        let mut env = Pendulum::new();
        let a = env.reset(42);
        let b = env.reset(42);
        assert_eq!(a, b);
        assert!((a[0] * a[0] + a[1] * a[1] - 1.0).abs() < 1e-12);
        assert!(a[2].abs() <= 1.0);
        assert_ne!(env.reset(43), a);
    }

    #[test]
    fn upright_is_a_fixed_point() {
        let mut env = Pendulum::new();
        env.set_state(0.0, 0.0);
        let r = env.step(&[0.0]).unwrap();
        assert_eq!(env.state(), (0.0, 0.0));
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_obs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn hanging_down_costs_pi_squared() {
        let mut env = Pendulum::new();
        env.set_state(PI, 0.0);
        let r = env.step(&[0.0]).unwrap();
        assert!((r.reward + PI * PI).abs() < 1e-12);
        assert!((r.reward - -9.8696).abs() < 1e-4);
        // sin(pi) is ~1.2e-16 in floating point, so the velocity stays ~0.
        assert!(env.state().1.abs() < 1e-14);
    }

    #[test]
    fn torque_is_clamped() {
        let mut a = Pendulum::new();
        let mut b = Pendulum::new();
        a.set_state(0.3, 0.1);
        b.set_state(0.3, 0.1);
        assert_eq!(a.step(&[50.0]).unwrap(), b.step(&[2.0]).unwrap());
    }

    #[test]
    fn truncates_after_200_steps() {
        let mut env = Pendulum::new();
        env.reset(1);
        for k in 1..=200 {
            let r = env.step(&[0.5]).unwrap();
            assert!(!r.done);
            assert_eq!(r.truncated, k == 200);
        }
        assert_eq!(env.step(&[0.0]), Err(EnvError::EpisodeOver));
    }

    #[test]
    fn step_requires_reset_and_valid_action() {
        let mut env = Pendulum::new();
        assert_eq!(env.step(&[0.0]), Err(EnvError::NotReset));
        env.reset(0);
        assert_eq!(env.step(&[0.0, 1.0]), Err(EnvError::ActionDim { expected: 1, got: 2 }));
        assert_eq!(env.step(&[f64::NAN]), Err(EnvError::NonFiniteAction));
    }

    #[test]
    fn wrap_maps_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn random_rollouts_stay_finite_and_bounded() {
        let floor = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        let mut env = Pendulum::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for episode in 0..5_000u64 {
            let obs = env.reset(episode);
            assert!(obs.iter().all(|v| v.is_finite()));
            loop {
                let r = env.step(&[rng.random_range(-3.0..3.0)]).unwrap();
                assert!(r.next_obs.iter().all(|v| v.is_finite()));
                assert!(r.reward <= 0.0 && r.reward >= floor, "{}", r.reward);
                if r.episode_over() {
                    break;
                }
            }
        }
    }
}
