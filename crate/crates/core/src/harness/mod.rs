//! Experiment orchestration: the rollout/train loop, seeding, CSV metrics and
//! multi-run suites.

mod config;
pub mod metrics;
mod run;
mod seeds;
mod suite;

pub use config::{ConfigError, RunConfig, KEYS, SEED_ENV_VAR};
pub use metrics::{EpisodeRecord, EvalRecord, MetricsError, SummaryRecord, TraceRecord};
pub use run::{
    run, run_with, write_run_outputs, HarnessError, RunOutput, EPISODES_FILE, EVAL_FILE, SUMMARY_FILE, TRACE_FILE,
};
pub use seeds::{substream, Stream};
pub use suite::{mean_std, ranked, run_suite, summarize, SuiteRun};
