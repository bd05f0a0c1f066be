//! Named gradient and numerics checks run by `replay-opt gradcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ddpg::{actor_gradient, actor_loss, critic_gradient, critic_loss, ActionMap, OuNoise};
use crate::ero::{surrogate_gradient, surrogate_loss};
use crate::nn::gradcheck::{max_relative_error, numeric_gradient, OutputLoss, SquaredError, DEFAULT_STEP};
use crate::nn::{Activation, Adam, GradTape, Matrix, Mlp, NnError};

pub const TOLERANCE: f64 = 1e-4;
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub passed: bool,
}

/// A check returns the worst error over its trials. `corrupt` adds a fixed
/// offset to the analytic side so the failure path can be exercised.
pub type CheckFn = fn(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError>;

pub struct GradCheckRegistry {
    checks: Vec<(&'static str, CheckFn)>,
}

impl Default for GradCheckRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl GradCheckRegistry {
    pub fn builtin() -> Self {
        Self {
            checks: vec![
                ("mlp", mlp_check as CheckFn),
                ("critic-loss", critic_check),
                ("actor-chain", actor_check),
                ("ero-surrogate", ero_check),
                ("adam-step", adam_check),
                ("ou-noise", ou_check),
            ],
        }
    }

    pub fn register(&mut self, name: &'static str, check: CheckFn) {
        self.checks.push((name, check));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checks.iter().map(|(n, _)| *n).collect()
    }

    /// Runs every check; a check whose name equals `corrupt` gets a perturbed gradient.
    pub fn run_all(&self, trials: usize, seed: u64, corrupt: Option<&str>) -> Vec<CheckReport> {
        self.checks
            .iter()
            .map(|&(name, check)| {
                let max_error = check(trials, seed, corrupt == Some(name)).unwrap_or(f64::INFINITY);
                CheckReport {
                    name,
                    trials,
                    max_error,
                    passed: max_error < TOLERANCE,
                }
            })
            .collect()
    }
}

const CORRUPTION: f64 = 1e-2;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn compare(tape: &GradTape, numeric: &[f64], corrupt: bool) -> f64 {
    let mut analytic = tape.params.clone();
    if corrupt {
        analytic[0] += CORRUPTION;
    }
    max_relative_error(&analytic, numeric).0
}

fn smooth_act(rng: &mut ChaCha8Rng) -> Activation {
    [Activation::Tanh, Activation::Sigmoid, Activation::Linear][rng.random_range(0..3)]
}

fn mlp_check(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let depth = rng.random_range(1..4);
        let mut sizes = vec![rng.random_range(1..5)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..7));
        }
        let acts: Vec<Activation> = (0..depth).map(|_| smooth_act(&mut rng)).collect();
        let net = Mlp::new(&sizes, &acts, seed.wrapping_add(t as u64))?;
        let rows = rng.random_range(1..5);
        let input = random_matrix(&mut rng, rows, sizes[0]);
        let target = random_matrix(&mut rng, rows, *sizes.last().expect("nonempty"));
        let loss = SquaredError(target);
        let cache = net.forward(&input)?;
        let tape = net.backward(&cache, &loss.gradient(cache.output()))?;
        let numeric = numeric_gradient(&net, DEFAULT_STEP, |p| loss.value(&p.predict(&input).expect("shape")));
        worst = worst.max(compare(&tape, &numeric, corrupt));
    }
    Ok(worst)
}

fn critic_check(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC1);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let (obs, act) = (rng.random_range(1..4), rng.random_range(1..3));
        let critic = Mlp::new(
            &[obs + act, 6, 6, 1],
            &[Activation::Tanh, Activation::Tanh, Activation::Linear],
            seed.wrapping_add(100 + t as u64),
        )?;
        let n = 5;
        let inputs = random_matrix(&mut rng, n, obs + act);
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let weights: Option<Vec<f64>> = (t % 2 == 1).then(|| (0..n).map(|_| rng.random_range(0.1..1.0)).collect());
        let (_, tape, _) = critic_gradient(&critic, &inputs, &targets, weights.as_deref())?;
        let numeric = numeric_gradient(&critic, DEFAULT_STEP, |c| {
            critic_loss(c, &inputs, &targets, weights.as_deref()).expect("shape")
        });
        worst = worst.max(compare(&tape, &numeric, corrupt));
    }
    Ok(worst)
}

fn actor_check(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xAC);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let (obs, act) = (rng.random_range(1..4), rng.random_range(1..3));
        let actor = Mlp::new(
            &[obs, 6, act],
            &[Activation::Tanh, Activation::Tanh],
            seed.wrapping_add(200 + t as u64),
        )?;
        let critic = Mlp::new(
            &[obs + act, 6, 1],
            &[Activation::Tanh, Activation::Linear],
            seed.wrapping_add(300 + t as u64),
        )?;
        let map = ActionMap {
            scale: (0..act).map(|_| rng.random_range(0.5..2.5)).collect(),
            offset: (0..act).map(|_| rng.random_range(-0.5..0.5)).collect(),
            low: vec![f64::NEG_INFINITY; act],
            high: vec![f64::INFINITY; act],
        };
        let states = random_matrix(&mut rng, 4, obs);
        let (_, tape) = actor_gradient(&actor, &critic, &map, &states)?;
        let numeric = numeric_gradient(&actor, DEFAULT_STEP, |a| actor_loss(a, &critic, &map, &states).expect("shape"));
        worst = worst.max(compare(&tape, &numeric, corrupt));
    }
    Ok(worst)
}

fn ero_check(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE0);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let net = Mlp::new(
            &[3, 8, 8, 1],
            &[Activation::Tanh, Activation::Tanh, Activation::Sigmoid],
            seed.wrapping_add(400 + t as u64),
        )?;
        let rows = 8;
        let inputs = random_matrix(&mut rng, rows, 3);
        let bits: Vec<bool> = (0..rows).map(|_| rng.random()).collect();
        let reward = rng.random_range(-2.0..2.0);
        let (_, tape) = surrogate_gradient(&net, &inputs, &bits, reward)?;
        let numeric = numeric_gradient(&net, DEFAULT_STEP, |p| surrogate_loss(p, &inputs, &bits, reward).expect("shape"));
        worst = worst.max(compare(&tape, &numeric, corrupt));
    }
    Ok(worst)
}

/// Adam against an independent scalar transcription of the update rule.
fn adam_check(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xAD);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], seed.wrapping_add(t as u64))?;
        let lr = rng.random_range(1e-4..1e-2);
        let mut adam = Adam::new(&net, lr);
        let mut theta = net.params().to_vec();
        let mut m = vec![0.0; theta.len()];
        let mut v = vec![0.0; theta.len()];
        for step in 1..=5 {
            let g: Vec<f64> = (0..theta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut tape = GradTape::zeros_like(&net);
            tape.params.copy_from_slice(&g);
            adam.step(&mut net, &tape)?;
            for i in 0..theta.len() {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
                let m_hat = m[i] / (1.0 - 0.9f64.powi(step));
                let v_hat = v[i] / (1.0 - 0.999f64.powi(step));
                theta[i] -= lr * m_hat / (v_hat.sqrt() + 1e-8);
            }
        }
        let mut got = net.params().to_vec();
        if corrupt {
            got[0] += CORRUPTION;
        }
        worst = worst.max(max_relative_error(&got, &theta).0);
    }
    Ok(worst)
}

/// Same seed, same path; and each step follows the recursion for its draw.
fn ou_check(trials: usize, seed: u64, corrupt: bool) -> Result<f64, NnError> {
    let mut worst = 0.0f64;
    for t in 0..trials {
        let s = seed.wrapping_add(t as u64);
        let mut a = OuNoise::seeded(2, 0.15, 0.2, s);
        let mut b = OuNoise::seeded(2, 0.15, 0.2, s);
        let mut manual = OuNoise::seeded(2, 0.15, 0.2, s);
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x0E);
        for _ in 0..100 {
            let xa = a.sample().to_vec();
            let mut xb = b.sample().to_vec();
            if corrupt {
                xb[0] += CORRUPTION;
            }
            worst = worst.max(max_relative_error(&xa, &xb).0);
            let draws = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let before = manual.state().to_vec();
            let after = manual.advance_with(&draws).to_vec();
            let expected: Vec<f64> = before
                .iter()
                .zip(&draws)
                .map(|(x, d)| x + 0.15 * (0.0 - x) + 0.2 * d)
                .collect();
            worst = worst.max(max_relative_error(&after, &expected).0);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_required_checks() {
        let names = GradCheckRegistry::builtin().names();
        for required in ["mlp", "critic-loss", "actor-chain", "ero-surrogate", "adam-step", "ou-noise"] {
            assert!(names.contains(&required), "{required}");
        }
    }

    #[test]
    fn all_checks_pass() {
        for report in GradCheckRegistry::builtin().run_all(DEFAULT_TRIALS, 0, None) {
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn corruption_fails_only_the_named_check() {
        let reports = GradCheckRegistry::builtin().run_all(3, 1, Some("actor-chain"));
        for r in reports {
            assert_eq!(r.passed, r.name != "actor-chain", "{r:?}");
        }
    }
}
