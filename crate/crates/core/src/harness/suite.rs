use std::collections::BTreeMap;

use rayon::prelude::*;

use super::metrics::SummaryRecord;
use super::run::{run_with, HarnessError, RunOutput};
use super::RunConfig;
use crate::registry::{EnvRegistry, SamplerRegistry};

/// One run of a suite with its configuration.
#[derive(Debug)]
pub struct SuiteRun {
    pub config: RunConfig,
    pub result: Result<RunOutput, HarnessError>,
}

/// Runs every configuration independently on up to `jobs` threads. Results
/// keep the input order, and a failing run does not stop the others.
pub fn run_suite(configs: &[RunConfig], jobs: usize) -> Vec<SuiteRun> {
    let execute = || {
        let samplers = SamplerRegistry::builtin();
        let envs = EnvRegistry::builtin();
        configs
            .par_iter()
            .map(|config| SuiteRun {
                config: config.clone(),
                result: run_with(config, &samplers, &envs),
            })
            .collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(execute),
        Err(_) => execute(),
    }
}

/// Sample mean and standard deviation with denominator `n − 1` (0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// One row per `config_id` over its successful runs, in first-appearance order.
pub fn summarize(runs: &[SuiteRun], record_wall_time: bool) -> Vec<SummaryRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&RunOutput>> = BTreeMap::new();
    for run in runs {
        let Ok(output) = &run.result else { continue };
        let id = run.config.config_id();
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(output);
    }
    order
        .into_iter()
        .map(|id| {
            let outputs = &groups[&id];
            let finals: Vec<f64> = outputs.iter().map(|o| o.final_mean.unwrap_or(f64::NAN)).collect();
            let (final_mean, final_std) = mean_std(&finals);
            SummaryRecord {
                config_id: id,
                sampler: outputs[0].sampler.clone(),
                env: outputs[0].env.clone(),
                seed_count: outputs.len() as u64,
                final_mean,
                final_std,
                wall_seconds: record_wall_time.then(|| outputs.iter().map(|o| o.wall_seconds).sum()),
            }
        })
        .collect()
}

/// Summary rows sorted by descending final mean; NaN rows last.
pub fn ranked(rows: &[SummaryRecord]) -> Vec<SummaryRecord> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| match (a.final_mean.is_nan(), b.final_mean.is_nan()) {
        (false, false) => b.final_mean.total_cmp(&a.final_mean),
        (x, y) => x.cmp(&y),
    });
    sorted
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(sampler: &str, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.sampler = sampler.into();
        cfg.seed = seed;
        cfg.total_timesteps = 400;
        cfg.warmup = 100;
        cfg.ddpg.hidden_sizes = vec![8];
        cfg.ero.hidden_sizes = vec![8];
        cfg.buffer_capacity = 500;
        cfg
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn singleton_suite_matches_run() {
        let runs = run_suite(&[tiny("uniform", 0)], 1);
        let rows = summarize(&runs, false);
        let out = runs[0].result.as_ref().unwrap();
        assert_eq!(rows, vec![out.summary(false)]);
    }

    #[test]
    fn groups_by_config_and_is_deterministic() {
        let configs: Vec<RunConfig> = ["uniform", "ero"]
            .iter()
            .flat_map(|s| (0..2).map(move |seed| tiny(s, seed)))
            .collect();
        let a = summarize(&run_suite(&configs, 2), false);
        let b = summarize(&run_suite(&configs, 1), false);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].seed_count, 2);
        assert_eq!(a[1].config_id, "pendulum-ero");
        assert_eq!(a, b);
    }

    #[test]
    fn failures_do_not_stop_the_suite() {
        let runs = run_suite(&[tiny("nope", 0), tiny("uniform", 0)], 1);
        assert!(runs[0].result.is_err());
        assert!(runs[1].result.is_ok());
        assert_eq!(summarize(&runs, false).len(), 1);
    }

    #[test]
    fn ranking_puts_best_first() {
        let row = |id: &str, m: f64| SummaryRecord {
            config_id: id.into(),
            sampler: String::new(),
            env: String::new(),
            seed_count: 1,
            final_mean: m,
            final_std: 0.0,
            wall_seconds: None,
        };
        let ids: Vec<String> = ranked(&[row("a", -5.0), row("b", f64::NAN), row("c", 3.0)])
            .into_iter()
            .map(|r| r.config_id)
            .collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }
}
