use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;

use crate::ddpg::{DdpgAgent, DdpgError, OuNoise};
use crate::envs::{EnvError, Environment};
use crate::nn::NnError;
use crate::registry::{EnvRegistry, RegistryError, SamplerContext, SamplerRegistry};
use crate::replay::{snapshot, ReplayBuffer, ReplayError, Transition};

use super::metrics::{self, EpisodeRecord, EvalRecord, MetricsError, SummaryRecord, TraceRecord};
use super::seeds::{substream, Stream};
use super::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numeric fault at step {step}: {message}")]
    Numeric { step: u64, message: String },
    #[error("run failed at step {step}: {message}")]
    Failed { step: u64, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, HarnessError::Numeric { .. })
    }

    fn from_agent(step: u64, err: DdpgError) -> Self {
        let numeric = matches!(
            err,
            DdpgError::NonFinite { .. }
                | DdpgError::Nn(NnError::NonFinite { .. })
                | DdpgError::Replay(ReplayError::Nn(NnError::NonFinite { .. }))
                | DdpgError::Replay(ReplayError::DegeneratePriorities { .. })
        );
        let message = err.to_string();
        if numeric {
            HarnessError::Numeric { step, message }
        } else {
            HarnessError::Failed { step, message }
        }
    }

    fn from_replay(step: u64, err: ReplayError) -> Self {
        Self::from_agent(step, DdpgError::Replay(err))
    }

    fn from_env(step: u64, err: EnvError) -> Self {
        match err {
            EnvError::NonFiniteAction => HarnessError::Numeric {
                step,
                message: err.to_string(),
            },
            other => HarnessError::Failed {
                step,
                message: other.to_string(),
            },
        }
    }
}

/// Everything a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub config_id: String,
    pub env: String,
    pub sampler: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub trace: Vec<TraceRecord>,
    pub evals: Vec<EvalRecord>,
    pub total_steps: u64,
    pub train_steps: u64,
    /// Steps of the episode still running when the budget ran out.
    pub partial_episode_steps: u64,
    /// Mean return over the final recent-episode window; `None` without finished episodes.
    pub final_mean: Option<f64>,
    pub wall_seconds: f64,
}

impl RunOutput {
    /// Mean return of the last `n` finished episodes.
    pub fn trailing_mean(&self, n: usize) -> Option<f64> {
        if self.episodes.is_empty() || n == 0 {
            return None;
        }
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        Some(tail.iter().map(|e| e.episode_return).sum::<f64>() / tail.len() as f64)
    }

    /// Best mean return over any `n` consecutive finished episodes.
    pub fn best_window_mean(&self, n: usize) -> Option<f64> {
        if n == 0 || self.episodes.len() < n {
            return None;
        }
        self.episodes
            .windows(n)
            .map(|w| w.iter().map(|e| e.episode_return).sum::<f64>() / n as f64)
            .reduce(f64::max)
    }

    pub fn summary(&self, record_wall_time: bool) -> SummaryRecord {
        SummaryRecord {
            config_id: self.config_id.clone(),
            sampler: self.sampler.clone(),
            env: self.env.clone(),
            seed_count: 1,
            final_mean: self.final_mean.unwrap_or(f64::NAN),
            final_std: 0.0,
            wall_seconds: record_wall_time.then_some(self.wall_seconds),
        }
    }
}

/// Mean of the most recent finished-episode returns.
#[derive(Clone, Debug)]
struct ReturnWindow {
    capacity: usize,
    returns: VecDeque<f64>,
}

impl ReturnWindow {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            returns: VecDeque::with_capacity(capacity),
        }
    }

    fn push(&mut self, value: f64) -> f64 {
        if self.returns.len() == self.capacity {
            self.returns.pop_front();
        }
        self.returns.push_back(value);
        self.mean().expect("just pushed")
    }

    fn mean(&self) -> Option<f64> {
        (!self.returns.is_empty()).then(|| self.returns.iter().sum::<f64>() / self.returns.len() as f64)
    }
}

/// Runs with the built-in samplers and environments.
pub fn run(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    run_with(config, &SamplerRegistry::builtin(), &EnvRegistry::builtin())
}

fn registry_error(err: RegistryError) -> HarnessError {
    match err {
        RegistryError::Unknown(u) => ConfigError::Invalid(u.to_string()).into(),
        RegistryError::Replay(r) => ConfigError::Invalid(r.to_string()).into(),
    }
}

/// Rollout/train loop: `rollout_steps` environment steps (storing each
/// transition and closing finished episodes), then `train_steps_per_iter`
/// agent updates with priority feedback, until `total_timesteps` steps.
pub fn run_with(
    config: &RunConfig,
    samplers: &SamplerRegistry,
    envs: &EnvRegistry,
) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut env = envs
        .create(&config.env)
        .map_err(|u| ConfigError::Invalid(u.to_string()))?;
    let spec = env.spec();

    let mut env_rng = substream(config.seed, Stream::Env);
    let mut init_rng = substream(config.seed, Stream::AgentInit);
    let mut agent = DdpgAgent::new(&spec, &config.ddpg, init_rng.next_u64())
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut noise = OuNoise::new(
        spec.action_dim,
        config.ddpg.ou_theta,
        config.ddpg.ou_sigma,
        substream(config.seed, Stream::Noise),
    );
    let per = config.per_config();
    let ero = config.ero_config();
    let mut ero_rng = substream(config.seed, Stream::Ero);
    let policy_init_seed = ero_rng.next_u64();
    let mut sampler = samplers
        .create(
            &config.sampler,
            SamplerContext {
                capacity: config.buffer_capacity,
                per: &per,
                ero: &ero,
                sample_rng: substream(config.seed, Stream::Sampler),
                policy_rng: ero_rng,
                policy_init_seed,
            },
        )
        .map_err(registry_error)?;
    let mut buffer = ReplayBuffer::with_epsilon(config.buffer_capacity, spec.obs_dim, spec.action_dim, per.epsilon)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let mut evaluator = (config.eval_every > 0).then(|| Evaluator {
        env: envs.create(&config.env).expect("created above"),
        rng: substream(config.seed, Stream::Eval),
        episodes: config.eval_episodes,
    });

    let mut episodes = Vec::new();
    let mut trace = Vec::new();
    let mut evals = Vec::new();
    let mut window = ReturnWindow::new(config.reward_window);

    let mut obs = env.reset(env_rng.next_u64());
    noise.reset();
    let mut global_step = 0u64;
    let mut train_steps = 0u64;
    let mut episode_return = 0.0;
    let mut episode_len = 0u64;

    while global_step < config.total_timesteps {
        let rollout_end = (global_step + config.rollout_steps).min(config.total_timesteps);
        while global_step < rollout_end {
            let action = agent
                .act(&obs, Some(&mut noise))
                .map_err(|e| HarnessError::from_agent(global_step, e.into()))?;
            let step = env
                .step(&action)
                .map_err(|e| HarnessError::from_env(global_step, e))?;
            global_step += 1;
            if !step.reward.is_finite() || step.next_obs.iter().any(|x| !x.is_finite()) {
                return Err(HarnessError::Numeric {
                    step: global_step,
                    message: "environment produced a non-finite observation or reward".into(),
                });
            }
            episode_return += step.reward;
            episode_len += 1;

            let over = step.episode_over();
            let transition = Transition::new(
                std::mem::replace(&mut obs, step.next_obs.clone()),
                action,
                step.reward,
                step.next_obs,
                step.done,
                global_step,
            );
            let stored = buffer
                .store(transition)
                .map_err(|e| HarnessError::from_replay(global_step, e))?;
            sampler
                .on_store(&mut buffer, stored.slot, global_step)
                .map_err(|e| HarnessError::from_replay(global_step, e))?;

            if over {
                let rc_window = window.push(episode_return);
                let report = sampler
                    .on_episode_end(&mut buffer, episode_return, global_step)
                    .map_err(|e| HarnessError::from_replay(global_step, e))?;
                episodes.push(EpisodeRecord {
                    episode: episodes.len() as u64,
                    global_step,
                    episode_return,
                    length: episode_len,
                    rc_window,
                    replay_reward: report.and_then(|r| r.replay_reward),
                    subset_size: report.map(|r| r.subset_size as u64),
                    subset_fallbacks: report.map(|r| r.subset_fallbacks),
                });
                obs = env.reset(env_rng.next_u64());
                noise.reset();
                episode_return = 0.0;
                episode_len = 0;
            }

            if let Some(ev) = evaluator.as_mut() {
                if global_step % config.eval_every == 0 {
                    let mean_return = ev
                        .evaluate(&agent)
                        .map_err(|e| HarnessError::from_agent(global_step, e))?;
                    evals.push(EvalRecord {
                        global_step,
                        episodes: ev.episodes as u64,
                        mean_return,
                    });
                }
            }
        }

        if buffer.len() < config.warmup.max(1) {
            continue;
        }
        for _ in 0..config.train_steps_per_iter {
            let outcome = agent
                .train_step(sampler.as_mut(), &mut buffer, config.batch_size)
                .map_err(|e| HarnessError::from_agent(global_step, e))?;
            train_steps += 1;
            if train_steps % config.trace_interval == 0 {
                trace.push(trace_record(&buffer, &outcome.batch.slots, &outcome.td_errors, global_step));
            }
            sampler
                .update_priorities(&mut buffer, &outcome.batch, &outcome.td_errors, global_step)
                .map_err(|e| HarnessError::from_replay(global_step, e))?;
        }
    }

    if let Some(path) = &config.snapshot_path {
        write_snapshot_file(path, &buffer)?;
    }

    Ok(RunOutput {
        config_id: config.config_id(),
        env: config.env.clone(),
        sampler: config.sampler.clone(),
        seed: config.seed,
        final_mean: window.mean(),
        episodes,
        trace,
        evals,
        total_steps: global_step,
        train_steps,
        partial_episode_steps: episode_len,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn trace_record(buffer: &ReplayBuffer, slots: &[usize], td_errors: &[f64], global_step: u64) -> TraceRecord {
    let n = slots.len() as f64;
    let mut step_diff = 0.0;
    let mut reward = 0.0;
    for &slot in slots {
        let t = buffer.get(slot);
        step_diff += global_step.saturating_sub(t.insert_timestep) as f64;
        reward += t.reward;
    }
    TraceRecord {
        global_step,
        mean_abs_td: td_errors.iter().map(|d| d.abs()).sum::<f64>() / n,
        mean_step_diff: step_diff / n,
        mean_reward: reward / n,
    }
}

fn write_snapshot_file(path: &Path, buffer: &ReplayBuffer) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let file = std::fs::File::create(path).map_err(io_err)?;
    snapshot::write_snapshot(buffer, std::io::BufWriter::new(file)).map_err(io_err)
}

/// Noise-free episodes on a separate environment instance; nothing is stored.
struct Evaluator {
    env: Box<dyn Environment>,
    rng: rand_chacha::ChaCha8Rng,
    episodes: usize,
}

impl Evaluator {
    fn evaluate(&mut self, agent: &DdpgAgent) -> Result<f64, DdpgError> {
        let mut total = 0.0;
        for _ in 0..self.episodes {
            let mut obs = self.env.reset(self.rng.next_u64());
            loop {
                let action = agent.act(&obs, None)?;
                let step = self
                    .env
                    .step(&action)
                    .map_err(|e| DdpgError::Config(e.to_string()))?;
                total += step.reward;
                if step.episode_over() {
                    break;
                }
                obs = step.next_obs;
            }
        }
        Ok(total / self.episodes as f64)
    }
}

/// File names inside a run's output directory.
pub const EPISODES_FILE: &str = "episodes.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const EVAL_FILE: &str = "eval.csv";

/// Writes `episodes.csv`, `trace.csv`, `summary.csv`, and `eval.csv` when evaluations ran.
pub fn write_run_outputs(dir: &Path, output: &RunOutput, record_wall_time: bool) -> Result<(), MetricsError> {
    metrics::write_episodes(&dir.join(EPISODES_FILE), &output.episodes)?;
    metrics::write_trace(&dir.join(TRACE_FILE), &output.trace)?;
    let summary = if output.episodes.is_empty() {
        Vec::new()
    } else {
        vec![output.summary(record_wall_time)]
    };
    metrics::write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    if !output.evals.is_empty() {
        metrics::write_evals(&dir.join(EVAL_FILE), &output.evals)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(sampler: &str, steps: u64) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.sampler = sampler.into();
        cfg.total_timesteps = steps;
        cfg.warmup = 100;
        cfg.trace_interval = 25;
        cfg.ddpg.hidden_sizes = vec![16, 16];
        cfg.ero.hidden_sizes = vec![8];
        cfg.buffer_capacity = 1000;
        cfg
    }

    #[test]
    fn empty_run() {
        let out = run(&tiny("uniform", 0)).unwrap();
        assert!(out.episodes.is_empty() && out.trace.is_empty());
        assert_eq!(out.final_mean, None);
        assert_eq!(out.total_steps, 0);
    }

    #[test]
    fn one_truncated_pendulum_episode() {
        let out = run(&tiny("uniform", 200)).unwrap();
        assert_eq!(out.episodes.len(), 1);
        assert_eq!(out.episodes[0].length, 200);
        assert_eq!(out.episodes[0].global_step, 200);
        assert_eq!(out.partial_episode_steps, 0);
        assert_eq!(out.episodes[0].rc_window, out.episodes[0].episode_return);
    }

    #[test]
    fn step_accounting_is_exact() {
        let out = run(&tiny("per_rank", 550)).unwrap();
        let lengths: u64 = out.episodes.iter().map(|e| e.length).sum();
        assert_eq!(lengths + out.partial_episode_steps, 550);
        assert_eq!(out.total_steps, 550);
        // Training starts once 100 transitions are stored: iterations 1..=6 train.
        assert_eq!(out.train_steps, 6 * 50);
        assert_eq!(out.trace.len(), 300 / 25);
    }

    #[test]
    fn identical_config_identical_output() {
        for sampler in ["uniform", "per_prop", "per_rank", "ero"] {
            let a = run(&tiny(sampler, 600)).unwrap();
            let b = run(&tiny(sampler, 600)).unwrap();
            assert_eq!(a.episodes, b.episodes, "{sampler}");
            assert_eq!(a.trace, b.trace, "{sampler}");
        }
    }

    #[test]
    fn ero_episodes_carry_policy_fields() {
        let out = run(&tiny("ero", 600)).unwrap();
        assert_eq!(out.episodes.len(), 3);
        assert_eq!(out.episodes[0].replay_reward, None);
        let second = &out.episodes[1];
        let expected = second.rc_window - out.episodes[0].rc_window;
        assert_eq!(second.replay_reward, Some(expected));
        assert!(second.subset_size.unwrap() <= 400);
        let plain = run(&tiny("uniform", 600)).unwrap();
        assert!(plain.episodes.iter().all(|e| e.subset_size.is_none()));
    }

    #[test]
    fn samplers_share_rollouts_before_training() {
        let mut a = tiny("uniform", 400);
        let mut b = tiny("ero", 400);
        a.warmup = 400;
        b.warmup = 400;
        let (a, b) = (run(&a).unwrap(), run(&b).unwrap());
        let returns = |o: &RunOutput| o.episodes.iter().map(|e| e.episode_return).collect::<Vec<_>>();
        assert_eq!(returns(&a), returns(&b));
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let mut cfg = tiny("uniform", 10);
        cfg.env = "cartpole".into();
        assert!(matches!(run(&cfg), Err(HarnessError::Config(_))));
        let cfg = tiny("her", 10);
        assert!(matches!(run(&cfg), Err(HarnessError::Config(_))));
    }

    #[test]
    fn exploding_learning_rate_is_a_numeric_fault() {
        let mut cfg = tiny("uniform", 2000);
        cfg.ddpg.critic_lr = 1e300;
        cfg.ddpg.actor_lr = 1e300;
        let err = run(&cfg).unwrap_err();
        assert!(err.is_numeric(), "{err}");
    }

    #[test]
    fn evaluations_do_not_disturb_training() {
        let mut with_eval = tiny("uniform", 400);
        with_eval.eval_every = 200;
        with_eval.eval_episodes = 1;
        let a = run(&with_eval).unwrap();
        let b = run(&tiny("uniform", 400)).unwrap();
        assert_eq!(a.evals.len(), 2);
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn snapshot_written_when_requested() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny("uniform", 150);
        cfg.snapshot_path = Some(dir.path().join("buf.erpb"));
        run(&cfg).unwrap();
        let file = std::fs::File::open(dir.path().join("buf.erpb")).unwrap();
        let snap = snapshot::read_snapshot(file).unwrap();
        assert_eq!(snap.records.len(), 150);
        assert_eq!(snap.records[0].0.insert_timestep, 1);
    }

    #[test]
    fn window_mean_tracks_recent_returns() {
        let mut w = ReturnWindow::new(2);
        assert_eq!(w.push(1.0), 1.0);
        assert_eq!(w.push(2.0), 1.5);
        assert_eq!(w.push(4.0), 3.0);
    }
}
