//! Command-line front end: single solves, the benchmark suite, and noise
//! sweeps. Exit codes: 0 success, 1 solver failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    aggregate_mean, emit_table, problem_by_name, run_benchmark_full, standard_cases,
    BenchmarkCase, TableFormat,
};
use crate::blackbox::NoisyProblem;
use crate::solver::{optimize, serialize_history, SolverConfig};

#[derive(Parser, Debug)]
#[command(
    name = "nowpac",
    about = "Derivative-free trust-region solver for inequality-constrained problems",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one catalogued problem and write its history file.
    Solve(SolveArgs),
    /// Run the whole problem catalogue and print a result table.
    Bench(BenchArgs),
    /// Sweep noise amplitudes on one problem, averaging over replicates.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct CommonOpts {
    /// Override a solver parameter, e.g. --set rho_min=1e-4 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// File of `key = value` lines applied before --set overrides.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for history files; falls back to $NOWPAC_OUT, then ".".
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed for noise streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep refining even when the noise indicator fires.
    #[arg(long = "no-early-termination")]
    no_early_termination: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Problem name: rosenbrock, aniso_exp, or hs<id>.
    problem: String,
    /// Uniform objective noise amplitude.
    #[arg(long = "noise-f", default_value_t = 0.0)]
    noise_f: f64,
    /// Uniform constraint noise amplitude.
    #[arg(long = "noise-c", default_value_t = 0.0)]
    noise_c: f64,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Stopping threshold applied to every case.
    #[arg(long, default_value_t = 1e-3)]
    sc: f64,
    #[arg(long, default_value = "csv")]
    format: TableFormatArg,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Problem name: rosenbrock, aniso_exp, or hs<id>.
    problem: String,
    /// Objective noise amplitudes, comma separated.
    #[arg(long = "noise-f", value_delimiter = ',', required = true)]
    noise_f: Vec<f64>,
    /// Constraint noise amplitude shared by all sweep points.
    #[arg(long = "noise-c", default_value_t = 0.0)]
    noise_c: f64,
    /// Replicates per noise amplitude.
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value = "csv")]
    format: TableFormatArg,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Debug, Clone, Copy)]
struct TableFormatArg(TableFormat);

impl std::str::FromStr for TableFormatArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(TableFormatArg)
    }
}

fn build_config(common: &CommonOpts) -> Result<SolverConfig, String> {
    let mut cfg = SolverConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), lineno + 1))?;
            cfg.set_field(key.trim(), value.trim())
                .map_err(|e| format!("{}:{}: {e}", path.display(), lineno + 1))?;
        }
    }
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set {kv:?}: expected KEY=VALUE"))?;
        cfg.set_field(key.trim(), value.trim())
            .map_err(|e| format!("--set {key}: {e}"))?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.no_early_termination {
        cfg.early_termination = false;
    }
    Ok(cfg)
}

fn output_dir(common: &CommonOpts) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os("NOWPAC_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn history_path(dir: &Path, case: &str, sc: f64, seed: u64) -> PathBuf {
    dir.join(format!("{case}_{sc:e}_{seed}.hist"))
}

fn write_history(path: &Path, content: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Parses and runs one invocation; `out` receives everything meant for
/// stdout. The binary passes `std::env::args()`.
pub fn run_with_writer<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    match cli.command {
        Command::Solve(args) => run_solve(args, out),
        Command::Bench(args) => run_bench(args, out),
        Command::Sweep(args) => run_sweep(args, out),
    }
    .unwrap_or_else(|(code, msg)| {
        eprintln!("{msg}");
        code
    })
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with_writer(args, &mut lock)
}

type CmdResult = Result<i32, (i32, String)>;

fn usage(msg: String) -> (i32, String) {
    (2, msg)
}

fn failure(msg: String) -> (i32, String) {
    (1, msg)
}

fn run_solve(args: SolveArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = build_config(&args.common).map_err(usage)?;
    let base = problem_by_name(&args.problem)
        .ok_or_else(|| usage(format!("unknown problem {:?}", args.problem)))?;
    let problem = if args.noise_f > 0.0 || args.noise_c > 0.0 {
        NoisyProblem::new(base, args.noise_f, args.noise_c, cfg.seed).into_problem()
    } else {
        base
    };
    let outcome = optimize(&problem, &cfg).map_err(|e| failure(e.to_string()))?;
    let dir = output_dir(&args.common);
    let path = history_path(&dir, &problem.name, cfg.rho_min, cfg.seed);
    write_history(&path, &serialize_history(&problem, &cfg, &outcome)).map_err(failure)?;

    let xs: Vec<String> = outcome.x_best.iter().map(|v| format!("{v:.10e}")).collect();
    writeln!(out, "x_best = [{}]", xs.join(", ")).unwrap();
    writeln!(out, "f_best = {:.10e}", outcome.f_best).unwrap();
    writeln!(out, "n_evals = {}", outcome.counter.count()).unwrap();
    writeln!(out, "history = {}", path.display()).unwrap();
    writeln!(out, "terminated_by={}", outcome.termination.as_str()).unwrap();
    Ok(0)
}

fn run_bench(args: BenchArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = build_config(&args.common).map_err(usage)?;
    let dir = output_dir(&args.common);
    let mut rows = Vec::new();
    for case in standard_cases(args.sc) {
        let runs = run_benchmark_full(&case, &cfg).map_err(|e| failure(e.to_string()))?;
        for run in &runs {
            if !run.history.is_empty() {
                let path = history_path(&dir, &case.problem.name, case.sc, run.seed);
                write_history(&path, &run.history).map_err(failure)?;
            }
            rows.push(run.result.clone());
        }
    }
    let table = emit_table(&rows, args.format.0).map_err(|e| failure(e.to_string()))?;
    write!(out, "{table}").unwrap();
    Ok(0)
}

fn run_sweep(args: SweepArgs, out: &mut dyn Write) -> CmdResult {
    if args.replicates == 0 {
        return Err(usage("--replicates must be at least 1".into()));
    }
    let cfg = build_config(&args.common).map_err(usage)?;
    let dir = output_dir(&args.common);
    let problem = problem_by_name(&args.problem)
        .ok_or_else(|| usage(format!("unknown problem {:?}", args.problem)))?;
    let mut results = Vec::new();
    for &delta in &args.noise_f {
        let seeds: Vec<u64> = (0..args.replicates).map(|i| cfg.seed + i as u64).collect();
        let case = BenchmarkCase::new(problem.clone(), cfg.rho_min)
            .with_noise(delta, args.noise_c, seeds);
        let runs = run_benchmark_full(&case, &cfg).map_err(|e| failure(e.to_string()))?;
        // The amplitude goes into the file name so replicate seeds, which
        // repeat across sweep points, cannot collide.
        let sweep_name = format!("{}_df{delta:e}", problem.name);
        for run in &runs {
            if !run.history.is_empty() {
                let path = history_path(&dir, &sweep_name, case.sc, run.seed);
                write_history(&path, &run.history).map_err(failure)?;
            }
        }
        let per_run: Vec<_> = runs.into_iter().map(|r| r.result).collect();
        let mut mean = aggregate_mean(&per_run).map_err(|e| failure(e.to_string()))?;
        mean.case = format!("{}@df={delta:e}", mean.case);
        results.push(mean);
    }
    let table = emit_table(&results, args.format.0).map_err(|e| failure(e.to_string()))?;
    write!(out, "{table}").unwrap();
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn run_cli(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_with_writer(args.iter().copied(), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn solve_writes_history_and_reports_termination() {
        let dir = tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, stdout) = run_cli(&[
            "nowpac",
            "solve",
            "rosenbrock",
            "--set",
            "rho_min=1e-3",
            "--out",
            out,
        ]);
        assert_eq!(code, 0, "stdout: {stdout}");
        assert!(stdout.lines().last().unwrap().starts_with("terminated_by="));
        let hist = dir.path().join("rosenbrock_1e-3_0.hist");
        assert!(hist.exists(), "missing {}", hist.display());
        let text = fs::read_to_string(hist).unwrap();
        assert!(text.contains("# rho_min = 1.0000000000000000e-3"));
    }

    #[test]
    fn unknown_problem_is_a_usage_error() {
        let (code, _) = run_cli(&["nowpac", "solve", "florp"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn out_of_range_override_is_a_usage_error() {
        let (code, _) = run_cli(&["nowpac", "solve", "rosenbrock", "--set", "gamma=1.5"]);
        assert_eq!(code, 2);
        let (code, _) = run_cli(&["nowpac", "solve", "rosenbrock", "--set", "nonsense=1"]);
        assert_eq!(code, 2);
        let (code, _) = run_cli(&["nowpac", "solve", "rosenbrock", "--set", "gamma"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn config_file_applies_before_overrides() {
        let dir = tempdir().unwrap();
        let cfg_path = dir.path().join("run.cfg");
        fs::write(&cfg_path, "rho_min = 1e-2\n# comment\ngamma = 0.5\n").unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, _) = run_cli(&[
            "nowpac",
            "solve",
            "rosenbrock",
            "--config",
            cfg_path.to_str().unwrap(),
            "--set",
            "rho_min=2e-2",
            "--out",
            out,
        ]);
        assert_eq!(code, 0);
        // The override wins over the file.
        assert!(dir.path().join("rosenbrock_2e-2_0.hist").exists());
    }

    #[test]
    fn env_var_supplies_output_dir() {
        let dir = tempdir().unwrap();
        std::env::set_var("NOWPAC_OUT", dir.path());
        let (code, _) = run_cli(&["nowpac", "solve", "hs227", "--set", "rho_min=1e-2"]);
        std::env::remove_var("NOWPAC_OUT");
        assert_eq!(code, 0);
        assert!(dir.path().join("hs227_1e-2_0.hist").exists());
    }

    #[test]
    fn sweep_prints_one_row_per_amplitude() {
        let dir = tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, stdout) = run_cli(&[
            "nowpac",
            "sweep",
            "rosenbrock",
            "--noise-f",
            "1e-2,1e-3",
            "--replicates",
            "2",
            "--set",
            "rho_min=1e-4",
            "--out",
            out,
        ]);
        assert_eq!(code, 0, "stdout: {stdout}");
        let lines: Vec<&str> = stdout.lines().collect();
        assert_eq!(lines.len(), 3, "{stdout}");
        assert!(lines[1].starts_with("rosenbrock@df=1e-2,"));
        assert!(lines[2].starts_with("rosenbrock@df=1e-3,"));
        // One history file per (amplitude, replicate).
        for name in [
            "rosenbrock_df1e-2_1e-4_0.hist",
            "rosenbrock_df1e-2_1e-4_1.hist",
            "rosenbrock_df1e-3_1e-4_0.hist",
            "rosenbrock_df1e-3_1e-4_1.hist",
        ] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
    }

    #[test]
    fn help_exits_zero() {
        let (code, text) = run_cli(&["nowpac", "--help"]);
        assert_eq!(code, 0);
        assert!(text.contains("solve"));
        assert!(text.contains("sweep"));
    }
}
