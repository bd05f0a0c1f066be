//! End-to-end checks of the `replay-opt` binary's contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_replay-opt");

const TINY: &str = "\
env = pendulum
sampler = ero
total_timesteps = 600
warmup = 100
trace_interval = 20
buffer_capacity = 1000
ddpg.hidden = 16, 16
ero.hidden = 8
record_wall_time = false
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(&path, text).unwrap();
    path
}

fn replay_opt(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("REPLAY_OPT_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_exits_2_naming_path() {
    let o = replay_opt(&["run", "--config", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.conf"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "env = pendulum\nddpg.momentum = 0.9\n");
    let o = replay_opt(&["run", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2: unknown key `ddpg.momentum`"));
    let o = replay_opt(&["run", "--config", path_str(&cfg), "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_sampler_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = replay_opt(&["run", "--config", path_str(&cfg), "--set", "sampler=her"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown sampler `her`"));
}

#[test]
fn empty_run_writes_header_only_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = replay_opt(&["run", "--config", path_str(&cfg), "--set", "total_timesteps=0", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "sampler=ero env=pendulum steps=0 final=nan");
    for (file, header) in [
        ("episodes.csv", "episode,global_step,return,length,rc_window,replay_reward,subset_size,subset_fallbacks\n"),
        ("trace.csv", "global_step,mean_abs_td,mean_step_diff,mean_reward\n"),
        ("summary.csv", "config_id,sampler,env,seed_count,final_mean,final_std,wall_seconds\n"),
    ] {
        assert_eq!(std::fs::read_to_string(out.join(file)).unwrap(), header, "{file}");
    }
}

#[test]
fn ero_run_writes_three_csvs_and_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = replay_opt(&["run", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("sampler=ero env=pendulum steps=600 final=-"), "{line}");
    let episodes = std::fs::read_to_string(out.join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 4);
    assert!(!episodes.contains('\r'));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 300 / 20);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("pendulum-ero,ero,pendulum,1,"));
    assert!(summary.trim_end().ends_with(",0.0,"), "{summary}");
}

#[test]
fn eval_every_writes_eval_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = replay_opt(&[
        "run", "--config", path_str(&cfg), "--out", path_str(&out), "--eval-every", "300", "--set", "eval_episodes=1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let evals = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    assert_eq!(evals.lines().count(), 3);
}

#[test]
fn overrides_show_in_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = replay_opt(&[
        "run", "--config", path_str(&cfg), "--set", "ddpg.tau=0.005", "--set", "compare.samplers=uniform,ero",
        "--print-config",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let dump = stdout(&o);
    assert!(dump.contains("ddpg.tau = 0.005\n"));
    assert!(dump.contains("compare.samplers = uniform, ero\n"));
    assert!(dump.contains("sampler = ero\n"));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let seed_of = |config: &str, env: Option<&str>, set: Option<&str>| {
        let cfg = write_config(dir.path(), config);
        let mut cmd = Command::new(BIN);
        cmd.args(["run", "--config", path_str(&cfg), "--print-config"]).env_remove("REPLAY_OPT_SEED");
        if let Some(s) = set {
            cmd.args(["--set", s]);
        }
        if let Some(v) = env {
            cmd.env("REPLAY_OPT_SEED", v);
        }
        let dump = stdout(&cmd.output().unwrap());
        dump.lines().find_map(|l| l.strip_prefix("seed = ")).unwrap().to_string()
    };
    assert_eq!(seed_of("env = pendulum\n", None, None), "0");
    assert_eq!(seed_of("env = pendulum\n", Some("17"), None), "17");
    assert_eq!(seed_of("seed = 5\n", Some("17"), None), "5");
    assert_eq!(seed_of("seed = 5\n", Some("17"), Some("seed=9")), "9");
}

#[test]
fn numeric_fault_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = replay_opt(&[
        "run", "--config", path_str(&cfg), "--set", "ddpg.critic_lr=1e300", "--set", "ddpg.actor_lr=1e300",
        "--set", "total_timesteps=2000", "--out", path_str(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numeric fault at step"));
}

#[test]
fn compare_counts_runs_and_rows_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{TINY}total_timesteps = 400\ncompare.samplers = uniform, per_prop, per_rank, ero\ncompare.seeds = 0, 1, 2\n"),
    );
    let run = |out: &Path| {
        let o = replay_opt(&["compare", "--config", path_str(&cfg), "--out", path_str(out), "--jobs", "2"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("run ")).count(), 12);
        std::fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a.lines().count(), 1 + 4);
    assert_eq!(a, b);
    assert!(dir.path().join("a/pendulum-per_rank/seed2/episodes.csv").exists());
}

#[test]
fn compare_singleton_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{TINY}compare.samplers = uniform\ncompare.seeds = 0\n"));
    let out = dir.path().join("c");
    let o = replay_opt(&["compare", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert!(row.starts_with("pendulum-uniform,uniform,pendulum,1,"));
    assert!(row.ends_with(",0.0,"), "{row}");
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn compare_with_failing_runs_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{TINY}total_timesteps = 2000\nddpg.critic_lr = 1e300\nddpg.actor_lr = 1e300\ncompare.samplers = uniform\n"),
    );
    let o = replay_opt(&["compare", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("failed: numeric fault"));
}

fn write_trace(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("trace.csv");
    std::fs::write(&path, format!("global_step,mean_abs_td,mean_step_diff,mean_reward\n{body}")).unwrap();
    path
}

#[test]
fn trace_constant_series() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_trace(dir.path(), "1000,1,10,-1\n2000,1,20,-1\n3000,1,30,-1\n");
    let o = replay_opt(&["trace", "--input", path_str(&input), "--window", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("mean_abs_td min=1 max=1 final=1"), "{}", stdout(&o));
    assert!(stdout(&o).contains("mean_step_diff min=10 max=25 final=25"));
    assert!(dir.path().join("trace.smoothed.csv").exists());
}

#[test]
fn trace_window_one_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let body = "1000,0.5,10.25,-1.5\n2000,0.25,20.5,-0.75\n";
    let input = write_trace(dir.path(), body);
    let out = dir.path().join("same.csv");
    let o = replay_opt(&["trace", "--input", path_str(&input), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out).unwrap(), std::fs::read_to_string(input).unwrap());
}

#[test]
fn trace_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_trace(dir.path(), "");
    let out = dir.path().join("empty.csv");
    let o = replay_opt(&["trace", "--input", path_str(&input), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(out).unwrap(),
        "global_step,mean_abs_td,mean_step_diff,mean_reward\n"
    );
}

#[test]
fn trace_malformed_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_trace(dir.path(), "1000,1,10,-1\n2000,oops,20,-1\n");
    let o = replay_opt(&["trace", "--input", path_str(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_and_lists_checks() {
    let o = replay_opt(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for name in ["mlp", "critic-loss", "actor-chain", "ero-surrogate", "adam-step", "ou-noise"] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.ends_with("ok")), "{name}: {text}");
    }
}

#[test]
fn corrupted_gradient_exits_4() {
    let o = replay_opt(&["gradcheck", "--corrupt-check", "critic-loss", "--trials", "3"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("critic-loss"));
}
