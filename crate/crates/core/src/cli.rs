//! `replay-opt` command-line interface.
//!
//! Exit codes: 0 success, 1 some compare runs failed, 2 configuration or
//! input error, 3 numeric fault, 4 gradient check failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{GradCheckRegistry, DEFAULT_TRIALS, TOLERANCE};
use crate::harness::{self, metrics, ConfigError, HarnessError, RunConfig, TraceRecord};
use crate::registry::{EnvRegistry, SamplerRegistry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_GRADCHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "replay-opt", version, about = "Learned experience replay for DDPG: runs, comparisons, traces and gradient checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and write episodes, trace and summary CSVs.
    Run(RunArgs),
    /// Run every (env, sampler, seed) combination from the compare.* lists.
    Compare(CompareArgs),
    /// Summarize and optionally smooth a trace CSV.
    Trace(TraceArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run noise-free evaluation episodes every N environment steps.
    #[arg(long, value_name = "N")]
    pub eval_every: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Number of runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Trace CSV written by `run`.
    #[arg(long, alias = "config")]
    pub input: PathBuf,
    /// Trailing moving-average window in rows.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    /// Where to write the (smoothed) series; defaults to `<input>.smoothed.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb the analytic gradient of the named check (negative control).
    #[arg(long, hide = true)]
    pub corrupt_check: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(&a, out, err),
        Command::Compare(a) => cmd_compare(&a, out, err),
        Command::Trace(a) => cmd_trace(&a, out, err),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out, err),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::from_env_defaults()?.load(&args.config, &args.overrides)?;
    if let Some(dir) = &args.out {
        config.out_dir = dir.clone();
    }
    if let Some(n) = args.eval_every {
        config.eval_every = n;
    }
    config.validate()?;
    Ok(config)
}

fn check_names(envs: &[String], samplers: &[String]) -> Result<(), ConfigError> {
    let (env_reg, sampler_reg) = (EnvRegistry::builtin(), SamplerRegistry::builtin());
    for env in envs {
        if !env_reg.contains(env) {
            return Err(ConfigError::Invalid(format!(
                "unknown environment `{env}` (known: {})",
                env_reg.names().join(", ")
            )));
        }
    }
    for sampler in samplers {
        if !sampler_reg.contains(sampler) {
            return Err(ConfigError::Invalid(format!(
                "unknown sampler `{sampler}` (known: {})",
                sampler_reg.names().join(", ")
            )));
        }
    }
    Ok(())
}

fn exit_for(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Numeric { .. } => EXIT_NUMERIC,
        HarnessError::Config(_) => EXIT_CONFIG,
        _ => EXIT_PARTIAL,
    }
}

fn fmt_mean(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |m| m.to_string())
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match load_config(&args.common) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.common.print_config {
        let _ = write!(out, "{}", config.dump());
        return EXIT_OK;
    }
    if let Err(e) = check_names(&[config.env.clone()], &[config.sampler.clone()]) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }
    let output = match harness::run(&config) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_for(&e);
        }
    };
    if let Err(e) = harness::write_run_outputs(&config.out_dir, &output, config.record_wall_time) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }
    let _ = writeln!(
        out,
        "sampler={} env={} steps={} final={}",
        config.sampler,
        config.env,
        output.total_steps,
        fmt_mean(output.final_mean)
    );
    EXIT_OK
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match load_config(&args.common) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.common.print_config {
        let _ = write!(out, "{}", config.dump());
        return EXIT_OK;
    }
    let configs = config.expand_compare();
    let envs: Vec<String> = configs.iter().map(|c| c.env.clone()).collect();
    let samplers: Vec<String> = configs.iter().map(|c| c.sampler.clone()).collect();
    if let Err(e) = check_names(&envs, &samplers) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }

    let runs = harness::run_suite(&configs, args.jobs);
    let mut failures = 0;
    for run in &runs {
        let dir = config
            .out_dir
            .join(run.config.config_id())
            .join(format!("seed{}", run.config.seed));
        let status = match &run.result {
            Ok(output) => match harness::write_run_outputs(&dir, output, config.record_wall_time) {
                Ok(()) => format!("ok final={}", fmt_mean(output.final_mean)),
                Err(e) => {
                    failures += 1;
                    format!("failed: {e}")
                }
            },
            Err(e) => {
                failures += 1;
                format!("failed: {e}")
            }
        };
        let _ = writeln!(out, "run {} seed={} {status}", run.config.config_id(), run.config.seed);
    }

    let rows = harness::summarize(&runs, config.record_wall_time);
    if let Err(e) = metrics::write_summary(&config.out_dir.join(harness::SUMMARY_FILE), &rows) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }
    let _ = writeln!(out, "{:<32} {:>6} {:>14} {:>12}", "config_id", "seeds", "final_mean", "final_std");
    for row in harness::ranked(&rows) {
        let _ = writeln!(
            out,
            "{:<32} {:>6} {:>14.3} {:>12.3}",
            row.config_id, row.seed_count, row.final_mean, row.final_std
        );
    }
    if failures > 0 {
        let _ = writeln!(err, "{failures} of {} runs failed", runs.len());
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

/// Trailing moving average of each feature over `window` rows.
pub fn smooth_trace(records: &[TraceRecord], window: usize) -> Vec<TraceRecord> {
    let window = window.max(1);
    if window == 1 {
        return records.to_vec();
    }
    (0..records.len())
        .map(|i| {
            let slice = &records[i + 1 - (i + 1).min(window)..=i];
            let n = slice.len() as f64;
            let mean = |f: fn(&TraceRecord) -> f64| slice.iter().map(f).sum::<f64>() / n;
            TraceRecord {
                global_step: records[i].global_step,
                mean_abs_td: mean(|r| r.mean_abs_td),
                mean_step_diff: mean(|r| r.mean_step_diff),
                mean_reward: mean(|r| r.mean_reward),
            }
        })
        .collect()
}

fn default_trace_output(input: &Path) -> PathBuf {
    let mut name = input.file_stem().unwrap_or_default().to_os_string();
    name.push(".smoothed.csv");
    input.with_file_name(name)
}

pub fn cmd_trace(args: &TraceArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let records = match metrics::read_trace(&args.input) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let smoothed = smooth_trace(&records, args.window);
    let target = args.out.clone().unwrap_or_else(|| default_trace_output(&args.input));
    if let Err(e) = metrics::write_trace(&target, &smoothed) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }
    let _ = writeln!(out, "rows={} window={} output={}", smoothed.len(), args.window.max(1), target.display());
    let features: [(&str, fn(&TraceRecord) -> f64); 3] = [
        ("mean_abs_td", |r| r.mean_abs_td),
        ("mean_step_diff", |r| r.mean_step_diff),
        ("mean_reward", |r| r.mean_reward),
    ];
    if let Some(last) = smoothed.last() {
        for (name, f) in features {
            let min = smoothed.iter().map(f).fold(f64::INFINITY, f64::min);
            let max = smoothed.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(out, "{name} min={min} max={max} final={}", f(last));
        }
    }
    EXIT_OK
}

pub fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let registry = GradCheckRegistry::builtin();
    if let Some(name) = &args.corrupt_check {
        if !registry.names().contains(&name.as_str()) {
            let _ = writeln!(err, "error: unknown check `{name}`");
            return EXIT_CONFIG;
        }
    }
    let reports = registry.run_all(args.trials, args.seed, args.corrupt_check.as_deref());
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed { "ok" } else { "FAIL" };
        let _ = writeln!(out, "{:<14} trials={:<4} max_rel_err={:.3e} {status}", r.name, r.trials, r.max_error);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        let _ = writeln!(out, "all {} checks below {TOLERANCE:e}", reports.len());
        EXIT_OK
    } else {
        let _ = writeln!(err, "gradient check failed: {}", failed.join(", "));
        EXIT_GRADCHECK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: u64, td: f64) -> TraceRecord {
        TraceRecord {
            global_step: step,
            mean_abs_td: td,
            mean_step_diff: step as f64 / 2.0,
            mean_reward: -td,
        }
    }

    #[test]
    fn window_one_is_identity() {
        let rs = vec![rec(1, 1.0), rec(2, 3.0)];
        assert_eq!(smooth_trace(&rs, 1), rs);
        assert_eq!(smooth_trace(&rs, 0), rs);
    }

    #[test]
    fn trailing_average() {
        let rs = vec![rec(1, 1.0), rec(2, 3.0), rec(3, 5.0)];
        let s = smooth_trace(&rs, 2);
        let td: Vec<f64> = s.iter().map(|r| r.mean_abs_td).collect();
        assert_eq!(td, vec![1.0, 2.0, 4.0]);
        assert_eq!(s[2].global_step, 3);
    }

    #[test]
    fn default_output_sits_next_to_input() {
        assert_eq!(
            default_trace_output(Path::new("/x/run/trace.csv")),
            PathBuf::from("/x/run/trace.smoothed.csv")
        );
    }

    #[test]
    fn usage_errors_exit_two() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with(["replay-opt", "launch"].map(OsString::from), &mut o, &mut e);
        assert_eq!(code, EXIT_CONFIG);
    }
}
