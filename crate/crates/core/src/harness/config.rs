//! Run configuration and its `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! env = pendulum
//! sampler = ero
//! total_timesteps = 150000
//! ddpg.hidden = 64, 64
//! ero.subset_strict = false
//! compare.samplers = [uniform, per_prop, per_rank, ero]
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ddpg::DdpgConfig;
use crate::ero::EroConfig;
use crate::nn::Activation;
use crate::replay::PerConfig;

pub const SEED_ENV_VAR: &str = "REPLAY_OPT_SEED";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{}unknown key `{key}`", line_prefix(*.line))]
    UnknownKey { line: Option<usize>, key: String },
    #[error("{}invalid value `{value}` for `{key}`: {reason}", line_prefix(*.line))]
    InvalidValue {
        line: Option<usize>,
        key: String,
        value: String,
        reason: String,
    },
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Label used as the summary `config_id`; derived from env and sampler when empty.
    pub name: String,
    pub env: String,
    pub sampler: String,
    pub seed: u64,
    pub total_timesteps: u64,
    pub rollout_steps: u64,
    pub train_steps_per_iter: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Training starts once the buffer holds this many transitions.
    pub warmup: usize,
    /// Training steps between trace rows.
    pub trace_interval: u64,
    /// Finished episodes averaged for the cumulative-reward window.
    pub reward_window: usize,
    /// Environment steps between noise-free evaluations; 0 disables them.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Write elapsed seconds into the summary; disable for byte-stable summaries.
    pub record_wall_time: bool,
    /// Dump the final replay buffer here when set.
    pub snapshot_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub ddpg: DdpgConfig,
    pub per: PerConfig,
    /// Sampling calls over which PER's beta reaches 1; 0 means the run's total training steps.
    pub per_anneal_steps: u64,
    pub ero: EroConfig,
    pub compare_samplers: Vec<String>,
    pub compare_envs: Vec<String>,
    pub compare_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            env: "pendulum".into(),
            sampler: "uniform".into(),
            seed: 0,
            total_timesteps: 150_000,
            rollout_steps: 100,
            train_steps_per_iter: 50,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup: 1000,
            trace_interval: 1000,
            reward_window: 100,
            eval_every: 0,
            eval_episodes: 5,
            record_wall_time: true,
            snapshot_path: None,
            out_dir: PathBuf::from("runs"),
            ddpg: DdpgConfig::default(),
            per: PerConfig::default(),
            per_anneal_steps: 0,
            ero: EroConfig::default(),
            compare_samplers: Vec::new(),
            compare_envs: Vec::new(),
            compare_seeds: Vec::new(),
        }
    }
}

/// Every recognized key, in dump order.
pub const KEYS: &[&str] = &[
    "name",
    "env",
    "sampler",
    "seed",
    "total_timesteps",
    "rollout_steps",
    "train_steps_per_iter",
    "batch_size",
    "buffer_capacity",
    "warmup",
    "trace_interval",
    "reward_window",
    "eval_every",
    "eval_episodes",
    "record_wall_time",
    "snapshot_path",
    "out_dir",
    "ddpg.hidden",
    "ddpg.activation",
    "ddpg.output_init_bound",
    "ddpg.actor_lr",
    "ddpg.critic_lr",
    "ddpg.gamma",
    "ddpg.tau",
    "ddpg.ou_theta",
    "ddpg.ou_sigma",
    "per.alpha",
    "per.beta0",
    "per.anneal_steps",
    "per.epsilon",
    "per.rank_refresh_interval",
    "ero.hidden",
    "ero.activation",
    "ero.output_init_bound",
    "ero.lr",
    "ero.replay_updating_steps",
    "ero.batch_size",
    "ero.subset_strict",
    "ero.subset_refresh_always",
    "ero.lazy_refresh",
    "compare.samplers",
    "compare.envs",
    "compare.seeds",
];

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("{key}: {e}"))
}

/// Accepts plain integers and exact scientific notation such as `1.5e5`.
fn parse_count(value: &str) -> Result<u64, String> {
    if let Ok(v) = value.replace('_', "").parse::<u64>() {
        return Ok(v);
    }
    match value.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
        _ => Err("expected a non-negative integer".into()),
    }
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn parse_real(value: &str) -> Result<f64, String> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("must be finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn unquote(value: &str) -> &str {
    let v = value.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

fn parse_list(value: &str) -> Vec<String> {
    let v = value.trim();
    let v = v.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(v);
    v.split(',')
        .map(|s| unquote(s).to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_sizes(value: &str) -> Result<Vec<usize>, String> {
    let sizes = parse_list(value)
        .iter()
        .map(|s| parse_count(s).map(|c| c as usize))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err("expected a list of positive layer widths".into());
    }
    Ok(sizes)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Linear => "linear",
    }
}

impl RunConfig {
    /// Defaults with the seed taken from `REPLAY_OPT_SEED` when it is set.
    pub fn from_env_defaults() -> Result<Self, ConfigError> {
        let mut config = Self::default();
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            config.seed = parse_count(raw.trim()).map_err(|reason| ConfigError::InvalidValue {
                line: None,
                key: SEED_ENV_VAR.into(),
                value: raw.clone(),
                reason,
            })?;
        }
        Ok(config)
    }

    /// Reads `path` over `self`, then applies `key=value` overrides in order.
    pub fn load(mut self, path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        self.apply_text(&text)?;
        for o in overrides {
            self.apply_override(o)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        config.apply_text(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: content.to_string(),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: Some(line), key },
                ConfigError::InvalidValue { key, value, reason, .. } => ConfigError::InvalidValue {
                    line: Some(line),
                    key,
                    value,
                    reason,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = unquote(value);
        let result: Result<(), String> = (|| {
            match key {
                "name" => self.name = v.to_string(),
                "env" => self.env = v.to_string(),
                "sampler" => self.sampler = v.to_string(),
                "seed" => self.seed = parse_count(v)?,
                "total_timesteps" => self.total_timesteps = parse_count(v)?,
                "rollout_steps" => self.rollout_steps = parse_count(v)?,
                "train_steps_per_iter" => self.train_steps_per_iter = parse_count(v)?,
                "batch_size" => self.batch_size = parse_count(v)? as usize,
                "buffer_capacity" => self.buffer_capacity = parse_count(v)? as usize,
                "warmup" => self.warmup = parse_count(v)? as usize,
                "trace_interval" => self.trace_interval = parse_count(v)?,
                "reward_window" => self.reward_window = parse_count(v)? as usize,
                "eval_every" => self.eval_every = parse_count(v)?,
                "eval_episodes" => self.eval_episodes = parse_count(v)? as usize,
                "record_wall_time" => self.record_wall_time = parse_bool(v)?,
                "snapshot_path" => self.snapshot_path = (!v.is_empty()).then(|| PathBuf::from(v)),
                "out_dir" => self.out_dir = PathBuf::from(v),
                "ddpg.hidden" => self.ddpg.hidden_sizes = parse_sizes(v)?,
                "ddpg.activation" => self.ddpg.hidden_activation = parse_scalar(key, v)?,
                "ddpg.output_init_bound" => self.ddpg.output_init_bound = parse_real(v)?,
                "ddpg.actor_lr" => self.ddpg.actor_lr = parse_real(v)?,
                "ddpg.critic_lr" => self.ddpg.critic_lr = parse_real(v)?,
                "ddpg.gamma" => self.ddpg.gamma = parse_real(v)?,
                "ddpg.tau" => self.ddpg.tau = parse_real(v)?,
                "ddpg.ou_theta" => self.ddpg.ou_theta = parse_real(v)?,
                "ddpg.ou_sigma" => self.ddpg.ou_sigma = parse_real(v)?,
                "per.alpha" => self.per.alpha = parse_real(v)?,
                "per.beta0" => self.per.beta0 = parse_real(v)?,
                "per.anneal_steps" => self.per_anneal_steps = parse_count(v)?,
                "per.epsilon" => self.per.epsilon = parse_real(v)?,
                "per.rank_refresh_interval" => self.per.rank_refresh_interval = parse_count(v)?,
                "ero.hidden" => self.ero.hidden_sizes = parse_sizes(v)?,
                "ero.activation" => self.ero.hidden_activation = parse_scalar(key, v)?,
                "ero.output_init_bound" => self.ero.output_init_bound = parse_real(v)?,
                "ero.lr" => self.ero.learning_rate = parse_real(v)?,
                "ero.replay_updating_steps" => self.ero.replay_updating_steps = parse_count(v)? as usize,
                "ero.batch_size" => self.ero.policy_batch_size = parse_count(v)? as usize,
                "ero.subset_strict" => self.ero.subset_strict = parse_bool(v)?,
                "ero.subset_refresh_always" => self.ero.subset_refresh_always = parse_bool(v)?,
                "ero.lazy_refresh" => self.ero.lazy_refresh = parse_bool(v)?,
                "compare.samplers" => self.compare_samplers = parse_list(v),
                "compare.envs" => self.compare_envs = parse_list(v),
                "compare.seeds" => {
                    self.compare_seeds = parse_list(v).iter().map(|s| parse_count(s)).collect::<Result<_, _>>()?
                }
                _ => return Err(String::new()),
            }
            Ok(())
        })();
        result.map_err(|reason| {
            if reason.is_empty() && !KEYS.contains(&key) {
                ConfigError::UnknownKey {
                    line: None,
                    key: key.to_string(),
                }
            } else {
                ConfigError::InvalidValue {
                    line: None,
                    key: key.to_string(),
                    value: value.to_string(),
                    reason,
                }
            }
        })
    }

    /// Current value of `key` in the text format.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "name" => self.name.clone(),
            "env" => self.env.clone(),
            "sampler" => self.sampler.clone(),
            "seed" => self.seed.to_string(),
            "total_timesteps" => self.total_timesteps.to_string(),
            "rollout_steps" => self.rollout_steps.to_string(),
            "train_steps_per_iter" => self.train_steps_per_iter.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "buffer_capacity" => self.buffer_capacity.to_string(),
            "warmup" => self.warmup.to_string(),
            "trace_interval" => self.trace_interval.to_string(),
            "reward_window" => self.reward_window.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "record_wall_time" => self.record_wall_time.to_string(),
            "snapshot_path" => self
                .snapshot_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "out_dir" => self.out_dir.display().to_string(),
            "ddpg.hidden" => join(&self.ddpg.hidden_sizes),
            "ddpg.activation" => activation_name(self.ddpg.hidden_activation).into(),
            "ddpg.output_init_bound" => self.ddpg.output_init_bound.to_string(),
            "ddpg.actor_lr" => self.ddpg.actor_lr.to_string(),
            "ddpg.critic_lr" => self.ddpg.critic_lr.to_string(),
            "ddpg.gamma" => self.ddpg.gamma.to_string(),
            "ddpg.tau" => self.ddpg.tau.to_string(),
            "ddpg.ou_theta" => self.ddpg.ou_theta.to_string(),
            "ddpg.ou_sigma" => self.ddpg.ou_sigma.to_string(),
            "per.alpha" => self.per.alpha.to_string(),
            "per.beta0" => self.per.beta0.to_string(),
            "per.anneal_steps" => self.per_anneal_steps.to_string(),
            "per.epsilon" => self.per.epsilon.to_string(),
            "per.rank_refresh_interval" => self.per.rank_refresh_interval.to_string(),
            "ero.hidden" => join(&self.ero.hidden_sizes),
            "ero.activation" => activation_name(self.ero.hidden_activation).into(),
            "ero.output_init_bound" => self.ero.output_init_bound.to_string(),
            "ero.lr" => self.ero.learning_rate.to_string(),
            "ero.replay_updating_steps" => self.ero.replay_updating_steps.to_string(),
            "ero.batch_size" => self.ero.policy_batch_size.to_string(),
            "ero.subset_strict" => self.ero.subset_strict.to_string(),
            "ero.subset_refresh_always" => self.ero.subset_refresh_always.to_string(),
            "ero.lazy_refresh" => self.ero.lazy_refresh.to_string(),
            "compare.samplers" => join(&self.compare_samplers),
            "compare.envs" => join(&self.compare_envs),
            "compare.seeds" => join(&self.compare_seeds),
            _ => return None,
        })
    }

    /// The effective configuration in the text format; parses back to `self`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("every listed key has a value");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.rollout_steps == 0 {
            return invalid("rollout_steps must be positive");
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be positive");
        }
        if self.buffer_capacity == 0 {
            return invalid("buffer_capacity must be positive");
        }
        if self.trace_interval == 0 {
            return invalid("trace_interval must be positive");
        }
        if self.reward_window == 0 {
            return invalid("reward_window must be positive");
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return invalid("eval_episodes must be positive when eval_every is set");
        }
        self.ddpg
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.per
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ero_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Label for summaries: `name`, or `<env>-<sampler>`.
    pub fn config_id(&self) -> String {
        if self.name.is_empty() {
            format!("{}-{}", self.env, self.sampler)
        } else {
            self.name.clone()
        }
    }

    /// Training steps the run will perform if warm-up ends on the first iteration.
    pub fn planned_train_steps(&self) -> u64 {
        self.total_timesteps.div_ceil(self.rollout_steps) * self.train_steps_per_iter
    }

    pub fn per_config(&self) -> PerConfig {
        let anneal_steps = if self.per_anneal_steps == 0 {
            self.planned_train_steps().max(1)
        } else {
            self.per_anneal_steps
        };
        PerConfig {
            anneal_steps,
            ..self.per.clone()
        }
    }

    pub fn ero_config(&self) -> EroConfig {
        EroConfig {
            reward_window: self.reward_window,
            ..self.ero.clone()
        }
    }

    /// One configuration per (env, sampler, seed) in the compare lists; empty
    /// lists fall back to this config's single value.
    pub fn expand_compare(&self) -> Vec<RunConfig> {
        let envs = if self.compare_envs.is_empty() {
            vec![self.env.clone()]
        } else {
            self.compare_envs.clone()
        };
        let samplers = if self.compare_samplers.is_empty() {
            vec![self.sampler.clone()]
        } else {
            self.compare_samplers.clone()
        };
        let seeds = if self.compare_seeds.is_empty() {
            vec![self.seed]
        } else {
            self.compare_seeds.clone()
        };
        let mut out = Vec::with_capacity(envs.len() * samplers.len() * seeds.len());
        for env in &envs {
            for sampler in &samplers {
                for &seed in &seeds {
                    out.push(RunConfig {
                        name: String::new(),
                        env: env.clone(),
                        sampler: sampler.clone(),
                        seed,
                        ..self.clone()
                    });
                }
            }
        }
        out
    }
}
