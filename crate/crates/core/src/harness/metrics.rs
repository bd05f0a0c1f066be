//! CSV records written by a run: episodes, trace, evaluation, and suite summary.
//!
//! Files use `\n` line endings and the shortest decimal form that parses back
//! to the same `f64`. Optional fields are left empty.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub global_step: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: u64,
    /// Mean return over the recent-episode window, including this episode.
    pub rc_window: f64,
    pub replay_reward: Option<f64>,
    pub subset_size: Option<u64>,
    pub subset_fallbacks: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub global_step: u64,
    pub mean_abs_td: f64,
    /// Mean of `global_step − insert_timestep` over the batch.
    pub mean_step_diff: f64,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub global_step: u64,
    pub episodes: u64,
    pub mean_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub config_id: String,
    pub sampler: String,
    pub env: String,
    pub seed_count: u64,
    pub final_mean: f64,
    pub final_std: f64,
    pub wall_seconds: Option<f64>,
}

pub const EPISODE_HEADER: &[&str] = &[
    "episode",
    "global_step",
    "return",
    "length",
    "rc_window",
    "replay_reward",
    "subset_size",
    "subset_fallbacks",
];
pub const TRACE_HEADER: &[&str] = &["global_step", "mean_abs_td", "mean_step_diff", "mean_reward"];
pub const EVAL_HEADER: &[&str] = &["global_step", "episodes", "mean_return"];
pub const SUMMARY_HEADER: &[&str] = &[
    "config_id",
    "sampler",
    "env",
    "seed_count",
    "final_mean",
    "final_std",
    "wall_seconds",
];

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Csv {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
}

impl MetricsError {
    fn csv(path: &Path, err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line());
        let message = match line {
            Some(l) => format!("line {l}: {err}"),
            None => err.to_string(),
        };
        MetricsError::Csv {
            path: path.to_path_buf(),
            line,
            message,
        }
    }
}

/// Serializes `records` as CSV with `header` into any writer.
pub fn write_records<W: Write, T: Serialize>(out: W, header: &[&str], records: &[T]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses CSV produced by [`write_records`], checking the header.
pub fn read_records<R: Read, T: DeserializeOwned>(input: R, header: &[&str]) -> csv::Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(csv::Error::from(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("line 1: expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        )));
    }
    r.deserialize().collect()
}

pub fn write_file<T: Serialize>(path: &Path, header: &[&str], records: &[T]) -> Result<(), MetricsError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| MetricsError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let file = File::create(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_records(io::BufWriter::new(file), header, records).map_err(|e| MetricsError::csv(path, e))
}

pub fn read_file<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>, MetricsError> {
    let file = File::open(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_records(io::BufReader::new(file), header).map_err(|e| MetricsError::csv(path, e))
}

pub fn write_episodes(path: &Path, records: &[EpisodeRecord]) -> Result<(), MetricsError> {
    write_file(path, EPISODE_HEADER, records)
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>, MetricsError> {
    read_file(path, EPISODE_HEADER)
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), MetricsError> {
    write_file(path, TRACE_HEADER, records)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, MetricsError> {
    read_file(path, TRACE_HEADER)
}

pub fn write_evals(path: &Path, records: &[EvalRecord]) -> Result<(), MetricsError> {
    write_file(path, EVAL_HEADER, records)
}

pub fn write_summary(path: &Path, records: &[SummaryRecord]) -> Result<(), MetricsError> {
    write_file(path, SUMMARY_HEADER, records)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRecord>, MetricsError> {
    read_file(path, SUMMARY_HEADER)
}
