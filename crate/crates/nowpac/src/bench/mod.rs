//! Benchmark harness: catalogued problems, replicated solver runs with a
//! feasibility audit, distance-to-optimum accounting, noise sweeps with
//! early-termination savings, and CSV/markdown tables.

pub mod problems;

pub use problems::{all_problems, aniso_exp, hs_problem, problem_by_name, rosenbrock};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use thiserror::Error;

use crate::blackbox::{BlackBoxProblem, NoisyProblem};
use crate::feasibility::{ibp_gradient, ibp_value};
use crate::solver::{optimize, serialize_history, Outcome, SolverConfig, SolverError};
use crate::subsolver::{solve_generic, Objective, SmoothConstraint};

#[derive(Error, Debug)]
pub enum BenchError {
    #[error("unknown problem id {0}")]
    UnknownProblemId(u32),
    #[error("no results to tabulate")]
    EmptyResults,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub delta_f: f64,
    pub delta_c: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub problem: BlackBoxProblem,
    /// Stopping threshold; becomes the run's rho_min.
    pub sc: f64,
    pub noise: Option<NoiseSpec>,
    pub replicates: usize,
}

impl BenchmarkCase {
    pub fn new(problem: BlackBoxProblem, sc: f64) -> Self {
        assert!(sc > 0.0, "stopping threshold must be positive");
        Self {
            problem,
            sc,
            noise: None,
            replicates: 1,
        }
    }

    /// Adds uniform evaluation noise; one replicate per seed.
    pub fn with_noise(mut self, delta_f: f64, delta_c: f64, seeds: Vec<u64>) -> Self {
        assert!(!seeds.is_empty(), "at least one replicate seed required");
        self.replicates = seeds.len();
        self.noise = Some(NoiseSpec {
            delta_f,
            delta_c,
            seeds,
        });
        self
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub case: String,
    pub sc: f64,
    pub n_evals: f64,
    /// Euclidean distance to the known optimum; absent without one.
    pub d_x: Option<f64>,
    /// |f(x_best) - f*| measured on the noise-free objective.
    pub d_f_abs: Option<f64>,
    /// d_f_abs relative to |f*|, or d_f_abs itself when f* = 0.
    pub d_f_rel: Option<f64>,
    /// Evaluations the early-termination run avoided versus its twin.
    pub n_saved: Option<f64>,
    pub terminated_by: String,
}

/// One replicate's result together with its serialized history.
#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub result: BenchmarkResult,
    pub history: String,
    pub seed: u64,
}

fn result_from_outcome(
    case: &BenchmarkCase,
    outcome: &Outcome,
    n_saved: Option<f64>,
) -> BenchmarkResult {
    let truth = &case.problem;
    let (f_true, _) = truth.eval_raw(&outcome.x_best);
    let (d_x, d_f_abs, d_f_rel) = match &truth.known_optimum {
        Some(opt) => {
            let d_x = (&outcome.x_best - &opt.x_star).norm();
            let d_f = (f_true - opt.f_star).abs();
            let d_rel = if opt.f_star != 0.0 {
                d_f / opt.f_star.abs()
            } else {
                d_f
            };
            (Some(d_x), Some(d_f), Some(d_rel))
        }
        None => (None, None, None),
    };
    BenchmarkResult {
        case: truth.name.clone(),
        sc: case.sc,
        n_evals: outcome.counter.count() as f64,
        d_x,
        d_f_abs,
        d_f_rel,
        n_saved,
        terminated_by: outcome.termination.as_str().to_string(),
    }
}

/// Every recorded iterate must satisfy the true constraints; a violation is
/// a solver bug, not a benchmark outcome.
fn audit_feasibility(problem: &BlackBoxProblem, outcome: &Outcome) {
    for rec in &outcome.history {
        let (_, c) = problem.eval_raw(&rec.x);
        for (i, ci) in c.iter().enumerate() {
            assert!(
                *ci <= 1e-9,
                "{}: iterate at k={} violates constraint {}: {}",
                problem.name,
                rec.k,
                i,
                ci
            );
        }
    }
}

/// Runs all replicates of a case. Noisy replicates get a fresh noise stream
/// per seed; when early termination is on, a twin run with it off (same
/// seed, same stream) measures how many evaluations stopping early saved.
pub fn run_benchmark_full(
    case: &BenchmarkCase,
    config: &SolverConfig,
) -> Result<Vec<ReplicateRun>, BenchError> {
    let mut runs = Vec::with_capacity(case.replicates);
    for rep in 0..case.replicates {
        let mut cfg = config.clone();
        cfg.rho_min = case.sc;
        if cfg.rho_0 <= cfg.rho_min {
            cfg.rho_0 = cfg.rho_max.min(cfg.rho_min * 10.0).max(cfg.rho_min * 2.0);
        }
        let (problem, seed) = match &case.noise {
            Some(ns) => {
                let seed = ns.seeds[rep];
                (
                    NoisyProblem::new(case.problem.clone(), ns.delta_f, ns.delta_c, seed)
                        .into_problem(),
                    seed,
                )
            }
            None => (case.problem.clone(), config.seed),
        };
        cfg.seed = seed;

        match optimize(&problem, &cfg) {
            Ok(outcome) => {
                audit_feasibility(&case.problem, &outcome);
                let n_saved = match &case.noise {
                    Some(ns) if cfg.early_termination => {
                        let twin_problem = NoisyProblem::new(
                            case.problem.clone(),
                            ns.delta_f,
                            ns.delta_c,
                            seed,
                        )
                        .into_problem();
                        let mut twin_cfg = cfg.clone();
                        twin_cfg.early_termination = false;
                        let twin = optimize(&twin_problem, &twin_cfg)?;
                        Some(twin.counter.count() as f64 - outcome.counter.count() as f64)
                    }
                    _ => None,
                };
                runs.push(ReplicateRun {
                    result: result_from_outcome(case, &outcome, n_saved),
                    history: serialize_history(&problem, &cfg, &outcome),
                    seed,
                });
            }
            Err(e) => runs.push(ReplicateRun {
                result: BenchmarkResult {
                    case: case.problem.name.clone(),
                    sc: case.sc,
                    n_evals: 1.0,
                    d_x: None,
                    d_f_abs: None,
                    d_f_rel: None,
                    n_saved: None,
                    terminated_by: format!("error: {e}"),
                },
                history: String::new(),
                seed,
            }),
        }
    }
    Ok(runs)
}

pub fn run_benchmark(
    case: &BenchmarkCase,
    config: &SolverConfig,
) -> Result<Vec<BenchmarkResult>, BenchError> {
    Ok(run_benchmark_full(case, config)?
        .into_iter()
        .map(|r| r.result)
        .collect())
}

/// Collapses replicate rows into their mean; termination takes the most
/// frequent reason (ties break lexicographically).
pub fn aggregate_mean(results: &[BenchmarkResult]) -> Result<BenchmarkResult, BenchError> {
    let first = results.first().ok_or(BenchError::EmptyResults)?;
    let mean_opt = |get: &dyn Fn(&BenchmarkResult) -> Option<f64>| {
        let vals: Vec<f64> = results.iter().filter_map(get).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for r in results {
        *reasons.entry(&r.terminated_by).or_insert(0) += 1;
    }
    let terminated_by = reasons
        .iter()
        .max_by_key(|(_, &count)| count)
        .map(|(reason, _)| reason.to_string())
        .unwrap();
    Ok(BenchmarkResult {
        case: first.case.clone(),
        sc: first.sc,
        n_evals: results.iter().map(|r| r.n_evals).sum::<f64>() / results.len() as f64,
        d_x: mean_opt(&|r| r.d_x),
        d_f_abs: mean_opt(&|r| r.d_f_abs),
        d_f_rel: mean_opt(&|r| r.d_f_rel),
        n_saved: mean_opt(&|r| r.n_saved),
        terminated_by,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown table format {other:?} (csv|markdown)")),
        }
    }
}

const TABLE_COLUMNS: [&str; 8] = [
    "case",
    "SC",
    "n_evals",
    "d_x",
    "d_f_abs",
    "d_f_rel",
    "n_saved",
    "terminated_by",
];

fn count_cell(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn cells(r: &BenchmarkResult) -> [String; 8] {
    let err_cell = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4e}"));
    [
        r.case.clone(),
        format!("{:e}", r.sc),
        count_cell(r.n_evals),
        err_cell(r.d_x),
        err_cell(r.d_f_abs),
        err_cell(r.d_f_rel),
        r.n_saved.map_or("NA".to_string(), count_cell),
        r.terminated_by.clone(),
    ]
}

/// Result table with the fixed column set, one row per result.
pub fn emit_table(results: &[BenchmarkResult], format: TableFormat) -> Result<String, BenchError> {
    if results.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            writeln!(out, "{}", TABLE_COLUMNS.join(",")).unwrap();
            for r in results {
                writeln!(out, "{}", cells(r).join(",")).unwrap();
            }
        }
        TableFormat::Markdown => {
            writeln!(out, "| {} |", TABLE_COLUMNS.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(TABLE_COLUMNS.len())).unwrap();
            for r in results {
                writeln!(out, "| {} |", cells(r).join(" | ")).unwrap();
            }
        }
    }
    Ok(out)
}

struct TrueConstraint<'a> {
    problem: &'a BlackBoxProblem,
    index: usize,
    x: &'a DVector<f64>,
    eps_b: f64,
    p: f64,
}

impl SmoothConstraint for TrueConstraint<'_> {
    fn value(&self, s: &DVector<f64>) -> f64 {
        let (_, c) = self.problem.eval_raw(&(self.x + s));
        c[self.index] + ibp_value(s, self.eps_b, self.p)
    }

    fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        let (_, jc) = self.problem.gradient(&(self.x + s));
        jc.row(self.index).transpose() + ibp_gradient(s, self.eps_b, self.p)
    }
}

/// Exact criticality measure at x: the largest possible decrease of the
/// linearized objective over offset-feasible directions in the unit ball,
/// computed on the true constraints with analytic gradients. Zero at a
/// critical point; equal to ‖∇f(x)‖ when no constraint interferes.
pub fn exact_criticality_oracle(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    eps_b: f64,
    p: f64,
) -> Result<f64, BenchError> {
    assert!(
        problem.has_gradient(),
        "the criticality oracle needs analytic gradients"
    );
    let (g, _) = problem.gradient(x);
    let cons: Vec<TrueConstraint> = (0..problem.r)
        .map(|index| TrueConstraint {
            problem,
            index,
            x,
            eps_b,
            p,
        })
        .collect();
    let refs: Vec<&dyn SmoothConstraint> =
        cons.iter().map(|c| c as &dyn SmoothConstraint).collect();
    let sol = solve_generic(&Objective::Linear(&g), &refs, 1.0, problem.n)
        .map_err(SolverError::from)?;
    Ok(sol.objective_value.min(0.0).abs())
}

/// One aggregated row per noise amplitude, each over `replicates` seeded
/// runs with the early-termination twin accounting.
pub fn noise_sweep(
    problem: &BlackBoxProblem,
    deltas: &[f64],
    replicates: usize,
    config: &SolverConfig,
) -> Result<Vec<(f64, BenchmarkResult)>, BenchError> {
    assert!(replicates >= 1);
    let mut rows = Vec::new();
    for &delta in deltas {
        let seeds: Vec<u64> = (0..replicates).map(|i| config.seed + i as u64).collect();
        let case = BenchmarkCase::new(problem.clone(), config.rho_min).with_noise(
            delta,
            0.0,
            seeds,
        );
        let results = run_benchmark(&case, config)?;
        rows.push((delta, aggregate_mean(&results)?));
    }
    Ok(rows)
}

/// The full catalogue as benchmark cases at one stopping threshold.
pub fn standard_cases(sc: f64) -> Vec<BenchmarkCase> {
    all_problems()
        .into_iter()
        .map(|p| BenchmarkCase::new(p, sc))
        .collect()
}
