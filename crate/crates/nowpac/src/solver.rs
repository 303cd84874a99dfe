//! The trust-region iteration driving the whole solver.
//!
//! Each iteration: measure approximate criticality on the surrogates
//! (shrinking the radius while the measure is small and the geometry poor),
//! compute a trial step on the offset-feasible set, evaluate the black box at
//! the trial point, discard it outright if it violates the true constraints,
//! otherwise accept or reject by the actual-versus-predicted decrease ratio
//! and update the radius. At rejected steps the surrogate Hessian norms feed
//! a noise indicator; once those norms grow like 1/ρ² the refinement is
//! fighting evaluation noise rather than curvature and the run stops early.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DVector;
use thiserror::Error;

use crate::blackbox::{BlackBoxProblem, EvalCounter};
use crate::feasibility::{adapt_eps_b, EPS_B_MAX_FACTOR};
use crate::subsolver::{solve_criticality, solve_trial_step, SubproblemSpec, SubsolverError};
use crate::surrogate::{
    build_models, ensure_fully_linear, is_fully_linear, max_points, update_set_after_step,
    InterpolationSet, QuadraticModel, SurrogateError,
};

/// Floor under the predicted decrease when forming the acceptance ratio.
const DECREASE_FLOOR: f64 = 1e-14;
/// Consecutive infeasible trial points before the offset scale is escalated.
const INFEASIBLE_ESCALATION_STREAK: usize = 3;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Inner-boundary-path scale.
    pub eps_b: f64,
    /// Acceptance threshold: steps with ratio below this are rejected.
    pub eta_0: f64,
    /// Success threshold: ratios at or above this grow the radius.
    pub eta_1: f64,
    /// Radius shrink factor on rejected or infeasible steps.
    pub gamma: f64,
    /// Radius growth factor on successful steps.
    pub gamma_inc: f64,
    /// Radius shrink factor inside the criticality loop.
    pub omega: f64,
    /// Criticality threshold entering the radius-shrink loop.
    pub eps_c: f64,
    /// Criticality loop exits once rho ≤ mu · alpha.
    pub mu: f64,
    /// Sufficient-decrease coefficient; shortfalls are counted, not enforced.
    pub mu_1: f64,
    /// Inner-boundary-path exponent parameter, in [0, 1).
    pub p: f64,
    /// Criticality comparison exponent parameter; 0 keeps the plain test.
    pub q: f64,
    /// Initial trust-region radius.
    pub rho_0: f64,
    /// Radius below which the run stops.
    pub rho_min: f64,
    /// Radius cap.
    pub rho_max: f64,
    /// Evaluation budget.
    pub max_evals: usize,
    /// Trial points must satisfy c_i ≤ -margin to count as feasible.
    pub feasibility_margin: f64,
    /// Rejected-step samples kept for the noise regression.
    pub noise_window: usize,
    /// Hessian-growth slope at which an iteration counts as non-convergent.
    pub tau_threshold: f64,
    /// Consecutive non-convergent iterations that trigger early termination.
    pub nc_limit: usize,
    /// Whether noise detection may stop the run.
    pub early_termination: bool,
    /// Seed for noise wrappers built around this run (the core loop itself
    /// is deterministic).
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_b: 10.0,
            eta_0: 0.1,
            eta_1: 0.7,
            gamma: 0.8,
            gamma_inc: 2.0,
            omega: 0.6,
            eps_c: 1e-2,
            mu: 1.0,
            mu_1: 1e-4,
            p: 0.0,
            q: 0.0,
            rho_0: 0.1,
            rho_min: 1e-5,
            rho_max: 1.0,
            max_evals: 10_000,
            feasibility_margin: 0.0,
            noise_window: 5,
            tau_threshold: 1.0,
            nc_limit: 1,
            early_termination: true,
            seed: 0,
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl SolverConfig {
    /// Field names in serialization order. The single source of truth for
    /// `set_field`, `fields`, and the history header.
    pub const FIELD_NAMES: &'static [&'static str] = &[
        "eps_b",
        "eta_0",
        "eta_1",
        "gamma",
        "gamma_inc",
        "omega",
        "eps_c",
        "mu",
        "mu_1",
        "p",
        "q",
        "rho_0",
        "rho_min",
        "rho_max",
        "max_evals",
        "feasibility_margin",
        "noise_window",
        "tau_threshold",
        "nc_limit",
        "early_termination",
        "seed",
    ];

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError(msg));
        if !(self.eps_b > 0.0) {
            return err(format!("eps_b must be in (0, inf), got {}", self.eps_b));
        }
        if !(self.eta_0 >= 0.0 && self.eta_0 < 1.0) {
            return err(format!("eta_0 must be in [0, 1), got {}", self.eta_0));
        }
        if !(self.eta_1 >= self.eta_0 && self.eta_1 < 1.0 && self.eta_1 > 0.0) {
            return err(format!(
                "eta_1 must be in [eta_0, 1) and positive, got {}",
                self.eta_1
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return err(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if !(self.gamma_inc > 1.0) {
            return err(format!("gamma_inc must be in (1, inf), got {}", self.gamma_inc));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return err(format!("omega must be in (0, 1), got {}", self.omega));
        }
        if !(self.eps_c > 0.0) {
            return err(format!("eps_c must be in (0, inf), got {}", self.eps_c));
        }
        if !(self.mu > 0.0) {
            return err(format!("mu must be in (0, inf), got {}", self.mu));
        }
        if !(self.mu_1 > 0.0 && self.mu_1 <= 1.0) {
            return err(format!("mu_1 must be in (0, 1], got {}", self.mu_1));
        }
        if !(self.p >= 0.0 && self.p < 1.0) {
            return err(format!("p must be in [0, 1), got {}", self.p));
        }
        if !(self.q >= 0.0 && self.q < 1.0) {
            return err(format!("q must be in [0, 1), got {}", self.q));
        }
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_0 && self.rho_0 <= self.rho_max) {
            return err(format!(
                "radii must satisfy 0 < rho_min < rho_0 <= rho_max, got {} / {} / {}",
                self.rho_min, self.rho_0, self.rho_max
            ));
        }
        if self.max_evals == 0 {
            return err("max_evals must be at least 1".into());
        }
        if !(self.feasibility_margin >= 0.0) {
            return err(format!(
                "feasibility_margin must be >= 0, got {}",
                self.feasibility_margin
            ));
        }
        if self.noise_window < 3 {
            return err(format!(
                "noise_window must be at least 3, got {}",
                self.noise_window
            ));
        }
        if !self.tau_threshold.is_finite() {
            return err(format!(
                "tau_threshold must be finite, got {}",
                self.tau_threshold
            ));
        }
        if self.nc_limit == 0 {
            return err("nc_limit must be at least 1".into());
        }
        Ok(())
    }

    /// Sets one field from its string form, with the same range checks as
    /// [`validate`](Self::validate). Backs the CLI `--set key=value` flag.
    pub fn set_field(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .parse()
                .map_err(|_| ConfigError(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "eps_b" => self.eps_b = parse(key, value)?,
            "eta_0" => self.eta_0 = parse(key, value)?,
            "eta_1" => self.eta_1 = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "gamma_inc" => self.gamma_inc = parse(key, value)?,
            "omega" => self.omega = parse(key, value)?,
            "eps_c" => self.eps_c = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "mu_1" => self.mu_1 = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "rho_0" => self.rho_0 = parse(key, value)?,
            "rho_min" => self.rho_min = parse(key, value)?,
            "rho_max" => self.rho_max = parse(key, value)?,
            "max_evals" => self.max_evals = parse(key, value)?,
            "feasibility_margin" => self.feasibility_margin = parse(key, value)?,
            "noise_window" => self.noise_window = parse(key, value)?,
            "tau_threshold" => self.tau_threshold = parse(key, value)?,
            "nc_limit" => self.nc_limit = parse(key, value)?,
            "early_termination" => self.early_termination = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(ConfigError(format!("unknown config field {key:?}"))),
        }
        self.validate()
    }

    /// (name, value) pairs in `FIELD_NAMES` order.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        Self::FIELD_NAMES
            .iter()
            .map(|&name| {
                let v = match name {
                    "eps_b" => format!("{:.16e}", self.eps_b),
                    "eta_0" => format!("{:.16e}", self.eta_0),
                    "eta_1" => format!("{:.16e}", self.eta_1),
                    "gamma" => format!("{:.16e}", self.gamma),
                    "gamma_inc" => format!("{:.16e}", self.gamma_inc),
                    "omega" => format!("{:.16e}", self.omega),
                    "eps_c" => format!("{:.16e}", self.eps_c),
                    "mu" => format!("{:.16e}", self.mu),
                    "mu_1" => format!("{:.16e}", self.mu_1),
                    "p" => format!("{:.16e}", self.p),
                    "q" => format!("{:.16e}", self.q),
                    "rho_0" => format!("{:.16e}", self.rho_0),
                    "rho_min" => format!("{:.16e}", self.rho_min),
                    "rho_max" => format!("{:.16e}", self.rho_max),
                    "max_evals" => format!("{}", self.max_evals),
                    "feasibility_margin" => format!("{:.16e}", self.feasibility_margin),
                    "noise_window" => format!("{}", self.noise_window),
                    "tau_threshold" => format!("{:.16e}", self.tau_threshold),
                    "nc_limit" => format!("{}", self.nc_limit),
                    "early_termination" => format!("{}", self.early_termination),
                    "seed" => format!("{}", self.seed),
                    _ => unreachable!(),
                };
                (name, v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationStatus {
    Successful,
    Acceptable,
    Rejected,
    InfeasibleTrial,
    CriticalityShrink,
}

impl IterationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            IterationStatus::Successful => "successful",
            IterationStatus::Acceptable => "acceptable",
            IterationStatus::Rejected => "rejected",
            IterationStatus::InfeasibleTrial => "infeasible_trial",
            IterationStatus::CriticalityShrink => "criticality_shrink",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub status: IterationStatus,
    /// Radius in effect after the event.
    pub rho: f64,
    /// Criticality measure last computed when the event happened.
    pub alpha: Option<f64>,
    /// Acceptance ratio; absent for events without a ratio.
    pub r_k: Option<f64>,
    /// Objective value at the iterate after the event.
    pub f: f64,
    /// Iterate after the event.
    pub x: DVector<f64>,
    /// Spectral norms of the surrogate Hessians, objective first.
    pub hessian_norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    RhoMin,
    MaxEvals,
    NoiseDetected,
    ImprovementStalled,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::RhoMin => "rho_min",
            TerminationReason::MaxEvals => "max_evals",
            TerminationReason::NoiseDetected => "noise_detected",
            TerminationReason::ImprovementStalled => "improvement_stalled",
        }
    }
}

#[derive(Error, Debug)]
pub enum SolverError {
    #[error("starting point is infeasible: max constraint value {0:.6e}")]
    InfeasibleStart(f64),
    #[error("configuration rejected: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Subsolver(#[from] SubsolverError),
}

#[derive(Debug)]
pub struct Outcome {
    pub x_best: DVector<f64>,
    pub f_best: f64,
    pub history: Vec<IterationRecord>,
    pub termination: TerminationReason,
    /// Full evaluation log of the run; `counter.count()` is the evaluation
    /// count.
    pub counter: EvalCounter,
    /// Trial steps whose predicted decrease fell short of mu_1·alpha·rho.
    /// Informational; such steps are still taken.
    pub short_decrease_steps: usize,
}

/// Acceptance ratio (f_old - f_new) / (m_old - m_new) with the predicted
/// decrease floored: a prediction at or below the floor cannot justify a
/// step, so the ratio degenerates to -inf and the step is rejected.
pub fn acceptance_ratio(f_old: f64, f_new: f64, m_old: f64, m_new: f64) -> f64 {
    let denom = m_old - m_new;
    if denom <= DECREASE_FLOOR {
        return f64::NEG_INFINITY;
    }
    (f_old - f_new) / denom
}

/// Radius update from the acceptance ratio, clamped at rho_max.
pub fn trust_region_update(r_k: f64, rho: f64, config: &SolverConfig) -> f64 {
    if r_k >= config.eta_1 {
        (config.gamma_inc * rho).min(config.rho_max)
    } else if r_k >= config.eta_0 {
        rho
    } else {
        config.gamma * rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseClass {
    InsufficientData,
    Convergent,
    NonConvergent,
}

/// Least-squares slope of y against x; zero when x has no spread.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var < 1e-12 {
        0.0
    } else {
        cov / var
    }
}

/// Watches surrogate Hessian norms at rejected steps. When noise of size δ
/// dominates the samples, an interpolation Hessian scales like δ/ρ², so the
/// regression slope τ of log‖H‖ against log(1/ρ) approaches 2; slopes at or
/// above the threshold classify the iteration as non-convergent.
///
/// Samples with a zero Hessian norm are skipped: they come from degenerate
/// simplex-sized rebuilds whose models are linear by construction, and a
/// single log 0 in the window would swamp the regression.
#[derive(Debug, Clone)]
pub struct NoiseIndicator {
    window: usize,
    buffers: Vec<VecDeque<(f64, f64)>>,
}

impl NoiseIndicator {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            buffers: Vec::new(),
        }
    }

    /// Records one rejected step and classifies the iteration.
    pub fn push_rejected(&mut self, rho: f64, hessian_norms: &[f64], tau_threshold: f64) -> NoiseClass {
        if self.buffers.len() < hessian_norms.len() {
            self.buffers.resize(hessian_norms.len(), VecDeque::new());
        }
        for (buf, &h) in self.buffers.iter_mut().zip(hessian_norms) {
            if h > 0.0 {
                buf.push_back((rho, h));
                while buf.len() > self.window {
                    buf.pop_front();
                }
            }
        }
        let taus = self.taus();
        if taus.iter().flatten().any(|&t| t >= tau_threshold) {
            NoiseClass::NonConvergent
        } else if taus.iter().any(Option::is_some) {
            NoiseClass::Convergent
        } else {
            NoiseClass::InsufficientData
        }
    }

    /// Per-model regression slopes; a model gets a slope only once its
    /// window is full, so a verdict never rests on a warmup transient.
    pub fn taus(&self) -> Vec<Option<f64>> {
        self.buffers
            .iter()
            .map(|buf| {
                if buf.len() < self.window {
                    return None;
                }
                let xs: Vec<f64> = buf.iter().map(|(rho, _)| -rho.ln()).collect();
                let ys: Vec<f64> = buf.iter().map(|(_, h)| h.ln()).collect();
                Some(regression_slope(&xs, &ys))
            })
            .collect()
    }
}

struct RunState {
    set: InterpolationSet,
    models: Vec<QuadraticModel>,
    rho: f64,
    eps_b_k: f64,
    alpha: Option<f64>,
    history: Vec<IterationRecord>,
    x_best: DVector<f64>,
    f_best: f64,
    short_decrease_steps: usize,
}

impl RunState {
    fn record(&mut self, k: usize, status: IterationStatus, r_k: Option<f64>) {
        self.history.push(IterationRecord {
            k,
            status,
            rho: self.rho,
            alpha: self.alpha,
            r_k,
            f: self.set.center_f(),
            x: self.set.center().clone(),
            hessian_norms: self.models.iter().map(|m| m.hessian_norm()).collect(),
        });
    }
}

/// Runs the solver. Returns the best feasible iterate, its objective value,
/// the per-iteration history, and why the run stopped.
pub fn optimize(problem: &BlackBoxProblem, config: &SolverConfig) -> Result<Outcome, SolverError> {
    config.validate()?;
    let margin = config.feasibility_margin;
    let mut counter = EvalCounter::new();
    counter.set_limit(config.max_evals);

    let x0 = problem.x0.clone();
    let (f0, c0) = problem.eval(&x0, &mut counter);
    let worst = c0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if c0.iter().any(|&ci| ci > -margin) {
        return Err(SolverError::InfeasibleStart(worst));
    }

    let mut st = RunState {
        set: InterpolationSet::new(x0.clone(), f0, c0),
        models: Vec::new(),
        rho: config.rho_0,
        eps_b_k: config.eps_b,
        alpha: None,
        history: Vec::new(),
        x_best: x0,
        f_best: f0,
        short_decrease_steps: 0,
    };
    let mut noise = NoiseIndicator::new(config.noise_window);
    let mut consecutive_nc = 0usize;
    let mut infeasible_streak = 0usize;
    let mut skip_criticality = false;

    ensure_fully_linear(&mut st.set, problem, &mut counter, st.rho)?;

    let mut k = 0usize;
    let termination = 'outer: loop {
        if counter.count() >= config.max_evals {
            break TerminationReason::MaxEvals;
        }
        // Accepted steps can degrade the geometry without any repair step in
        // between; a singular factorization here is fixed, not fatal.
        st.models = match build_models(&st.set, st.rho) {
            Ok(models) => models,
            Err(SurrogateError::SingularGeometry(_)) => {
                match ensure_fully_linear(&mut st.set, problem, &mut counter, st.rho) {
                    Ok(()) => {}
                    Err(SurrogateError::ImprovementStalled(_, _)) => {
                        break TerminationReason::ImprovementStalled;
                    }
                    Err(e) => return Err(e.into()),
                }
                match build_models(&st.set, st.rho) {
                    Ok(models) => models,
                    // A repair cut short by the budget may leave the set
                    // unbuildable; that is a budget stop, not a failure.
                    Err(_) if !counter.budget_left() => break TerminationReason::MaxEvals,
                    Err(e) => return Err(e.into()),
                }
            }
            Err(e) => return Err(e.into()),
        };

        // STEP 1: criticality. Skipped right after an infeasible trial, which
        // returns to the trial-step computation directly.
        if !skip_criticality {
            let (obj, cons) = st.models.split_first().expect("objective model present");
            st.alpha = Some(solve_criticality(
                &obj.g, cons, st.eps_b_k, config.p, st.rho,
            )?);
            if st.alpha.unwrap() <= config.eps_c {
                loop {
                    let fl = is_fully_linear(&st.set, st.rho);
                    if fl && st.rho <= config.mu * st.alpha.unwrap() {
                        break;
                    }
                    st.rho *= config.omega;
                    if st.rho < config.rho_min {
                        st.record(k, IterationStatus::CriticalityShrink, None);
                        break 'outer TerminationReason::RhoMin;
                    }
                    match ensure_fully_linear(&mut st.set, problem, &mut counter, st.rho) {
                        Ok(()) => {}
                        Err(SurrogateError::ImprovementStalled(_, _)) => {
                            st.record(k, IterationStatus::CriticalityShrink, None);
                            break 'outer TerminationReason::ImprovementStalled;
                        }
                        Err(e) => return Err(e.into()),
                    }
                    st.models = match build_models(&st.set, st.rho) {
                        Ok(models) => models,
                        Err(_) if !counter.budget_left() => {
                            st.record(k, IterationStatus::CriticalityShrink, None);
                            break 'outer TerminationReason::MaxEvals;
                        }
                        Err(e) => return Err(e.into()),
                    };
                    let (obj, cons) = st.models.split_first().unwrap();
                    st.alpha = Some(solve_criticality(
                        &obj.g, cons, st.eps_b_k, config.p, st.rho,
                    )?);
                    st.record(k, IterationStatus::CriticalityShrink, None);
                    if counter.count() >= config.max_evals {
                        break 'outer TerminationReason::MaxEvals;
                    }
                    if st.alpha.unwrap() > config.eps_c {
                        break;
                    }
                }
            }
        }
        skip_criticality = false;

        // STEP 2: trial step on the offset-feasible surrogate set.
        let (obj, cons) = st.models.split_first().expect("objective model present");
        let spec = SubproblemSpec {
            objective: obj,
            constraints: cons,
            eps_b: st.eps_b_k,
            p: config.p,
            radius: st.rho,
        };
        let sol = solve_trial_step(&spec)?;
        let predicted = obj.c0 - sol.objective_value;
        if let Some(alpha) = st.alpha {
            if predicted < config.mu_1 * alpha * st.rho {
                st.short_decrease_steps += 1;
            }
        }

        // STEP 3: evaluate the black box at the trial point.
        if counter.count() >= config.max_evals {
            break TerminationReason::MaxEvals;
        }
        let x_trial = st.set.center() + &sol.s;
        let (f_new, c_new) = problem.eval(&x_trial, &mut counter);

        if c_new.iter().any(|&ci| ci > -margin) {
            // Truly infeasible in spite of the offset: shrink, repair the
            // geometry, and retry the trial step without re-entering the
            // criticality loop.
            infeasible_streak += 1;
            if infeasible_streak >= INFEASIBLE_ESCALATION_STREAK {
                st.eps_b_k = (st.eps_b_k * 2.0).min(EPS_B_MAX_FACTOR * config.eps_b);
                infeasible_streak = 0;
            }
            update_set_after_step(&mut st.set, x_trial, f_new, c_new, false);
            st.rho *= config.gamma;
            st.record(k, IterationStatus::InfeasibleTrial, None);
            if st.rho < config.rho_min {
                break TerminationReason::RhoMin;
            }
            match ensure_fully_linear(&mut st.set, problem, &mut counter, st.rho) {
                Ok(()) => {}
                Err(SurrogateError::ImprovementStalled(_, _)) => {
                    break TerminationReason::ImprovementStalled;
                }
                Err(e) => return Err(e.into()),
            }
            skip_criticality = true;
            k += 1;
            continue;
        }
        infeasible_streak = 0;

        // STEP 4: acceptance test.
        let r_k = acceptance_ratio(st.set.center_f(), f_new, obj.c0, sol.objective_value);
        let status = if r_k >= config.eta_1 {
            IterationStatus::Successful
        } else if r_k >= config.eta_0 {
            IterationStatus::Acceptable
        } else {
            IterationStatus::Rejected
        };
        let accepted = status != IterationStatus::Rejected;
        let hessian_norms: Vec<f64> = st.models.iter().map(|m| m.hessian_norm()).collect();

        // Noise indicator: rejected steps contribute one (rho, ‖H‖) sample
        // per model, taken from the models the step was computed with. Only a
        // full, certified fully linear set is sampled: a thin set biases the
        // minimum-Frobenius-norm Hessian low, and its recovery as points
        // accumulate would read as noise-driven growth.
        let set_full = st.set.len() == max_points(st.set.dim());
        if !accepted && set_full && is_fully_linear(&st.set, st.rho) {
            match noise.push_rejected(st.rho, &hessian_norms, config.tau_threshold) {
                NoiseClass::NonConvergent => consecutive_nc += 1,
                NoiseClass::Convergent => consecutive_nc = 0,
                NoiseClass::InsufficientData => {}
            }
            if config.early_termination && consecutive_nc >= config.nc_limit {
                st.record(k, IterationStatus::Rejected, Some(r_k));
                break TerminationReason::NoiseDetected;
            }
        }

        let step_norm = sol.s.norm();
        let rho_used = st.rho;
        update_set_after_step(&mut st.set, x_trial, f_new, c_new, accepted);
        if accepted && f_new < st.f_best {
            st.f_best = f_new;
            st.x_best = st.set.center().clone();
        }

        // STEP 5: radius update and offset rescaling from the step just taken.
        st.rho = trust_region_update(r_k, st.rho, config);
        st.eps_b_k = adapt_eps_b(config.eps_b, step_norm, rho_used);
        st.record(k, status, Some(r_k));
        if st.rho < config.rho_min {
            break TerminationReason::RhoMin;
        }

        // STEP 6: geometry improvement after a rejection.
        if !accepted {
            match ensure_fully_linear(&mut st.set, problem, &mut counter, st.rho) {
                Ok(()) => {}
                Err(SurrogateError::ImprovementStalled(_, _)) => {
                    break TerminationReason::ImprovementStalled;
                }
                Err(e) => return Err(e.into()),
            }
        }
        k += 1;
    };

    Ok(Outcome {
        x_best: st.x_best,
        f_best: st.f_best,
        history: st.history,
        termination,
        counter,
        short_decrease_steps: st.short_decrease_steps,
    })
}

/// History file: `# key = value` header echoing the effective config, one
/// CSV line per iteration record, and a trailing termination comment.
/// All reals carry 17 significant digits, so equal runs serialize to equal
/// bytes.
pub fn serialize_history(
    problem: &BlackBoxProblem,
    config: &SolverConfig,
    outcome: &Outcome,
) -> String {
    let mut out = String::new();
    writeln!(out, "# nowpac history").unwrap();
    writeln!(out, "# problem = {}", problem.name).unwrap();
    writeln!(out, "# n = {}", problem.n).unwrap();
    writeln!(out, "# r = {}", problem.r).unwrap();
    for (name, value) in config.fields() {
        writeln!(out, "# {name} = {value}").unwrap();
    }
    for rec in &outcome.history {
        write!(out, "{},{}", rec.k, rec.status.as_str()).unwrap();
        write!(out, ",{:.16e}", rec.rho).unwrap();
        match rec.alpha {
            Some(a) => write!(out, ",{a:.16e}").unwrap(),
            None => write!(out, ",NA").unwrap(),
        }
        match rec.r_k {
            Some(r) => write!(out, ",{r:.16e}").unwrap(),
            None => write!(out, ",NA").unwrap(),
        }
        write!(out, ",{:.16e}", rec.f).unwrap();
        for xi in rec.x.iter() {
            write!(out, ",{xi:.16e}").unwrap();
        }
        for h in &rec.hessian_norms {
            write!(out, ",{h:.16e}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "# terminated_by = {}", outcome.termination.as_str()).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::NoisyProblem;

    fn sphere_problem() -> BlackBoxProblem {
        BlackBoxProblem::new("sphere", 2, 0, vec![1.0, 1.0], |x| {
            (x[0] * x[0] + x[1] * x[1], vec![])
        })
    }

    fn disk_problem() -> BlackBoxProblem {
        // min x1 + x2 s.t. ‖x‖² ≤ 1; optimum at (-√½, -√½).
        BlackBoxProblem::new("disk", 2, 1, vec![0.0, 0.0], |x| {
            (x[0] + x[1], vec![x[0] * x[0] + x[1] * x[1] - 1.0])
        })
    }

    #[test]
    fn config_defaults_are_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_out_of_range() {
        let mut c = SolverConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.eta_1 = 0.05; // below eta_0
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.rho_min = 0.2; // above rho_0
        assert!(c.validate().is_err());
    }

    #[test]
    fn set_field_roundtrips_every_field() {
        let defaults = SolverConfig::default();
        for (name, value) in defaults.fields() {
            let mut c = SolverConfig::default();
            c.set_field(name, &value).unwrap_or_else(|e| {
                panic!("field {name} rejected its own serialized value: {e}")
            });
        }
        let mut c = SolverConfig::default();
        assert!(c.set_field("gamma", "1.5").is_err());
        assert!(c.set_field("no_such_field", "1").is_err());
    }

    #[test]
    fn acceptance_ratio_and_floor() {
        assert!((acceptance_ratio(1.0, 0.991, 1.0, 0.99) - 0.9).abs() < 1e-12);
        assert_eq!(acceptance_ratio(1.0, 0.9, 1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(acceptance_ratio(1.0, 0.9, 1.0, 1.0 - 1e-15), f64::NEG_INFINITY);
    }

    #[test]
    fn trust_region_update_branches() {
        let cfg = SolverConfig::default();
        assert!((trust_region_update(0.8, 0.1, &cfg) - 0.2).abs() < 1e-15);
        assert!((trust_region_update(0.3, 0.1, &cfg) - 0.1).abs() < 1e-15);
        assert!((trust_region_update(0.05, 0.1, &cfg) - 0.08).abs() < 1e-15);
        // Growth clamps at rho_max.
        assert!((trust_region_update(0.9, 0.6, &cfg) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_indicator_detects_quadratic_growth() {
        let mut ind = NoiseIndicator::new(5);
        let mut class = NoiseClass::InsufficientData;
        for i in 0..5 {
            let rho = 0.1 * 0.8f64.powi(i);
            let h = 3.0 / (rho * rho);
            class = ind.push_rejected(rho, &[h], 1.0);
        }
        assert_eq!(class, NoiseClass::NonConvergent);
        let tau = ind.taus()[0].unwrap();
        assert!((tau - 2.0).abs() < 0.01, "tau = {tau}");
    }

    #[test]
    fn noise_indicator_accepts_constant_hessians() {
        let mut ind = NoiseIndicator::new(5);
        let mut class = NoiseClass::InsufficientData;
        for i in 0..5 {
            let rho = 0.1 * 0.8f64.powi(i);
            class = ind.push_rejected(rho, &[17.0], 1.0);
        }
        assert_eq!(class, NoiseClass::Convergent);
        let tau = ind.taus()[0].unwrap();
        assert!(tau.abs() < 0.01, "tau = {tau}");
    }

    #[test]
    fn noise_indicator_waits_for_a_full_window() {
        let mut ind = NoiseIndicator::new(3);
        assert_eq!(ind.push_rejected(0.1, &[1.0], 1.0), NoiseClass::InsufficientData);
        assert_eq!(ind.push_rejected(0.08, &[2.0], 1.0), NoiseClass::InsufficientData);
        assert_ne!(ind.push_rejected(0.064, &[4.0], 1.0), NoiseClass::InsufficientData);
    }

    #[test]
    fn noise_indicator_ignores_degenerate_linear_models() {
        // Zero Hessian norms come from simplex-sized rebuilds; interleaving
        // them with honest constant norms must not manufacture a slope.
        let mut ind = NoiseIndicator::new(3);
        let mut class = NoiseClass::InsufficientData;
        for i in 0..8 {
            let rho = 0.1 * 0.8f64.powi(i);
            let h = if i % 2 == 0 { 0.0 } else { 2.4 };
            class = ind.push_rejected(rho, &[h], 1.0);
        }
        assert_eq!(class, NoiseClass::Convergent);
        assert!(ind.taus()[0].unwrap().abs() < 1e-12);
    }

    #[test]
    fn unconstrained_sphere_converges_to_origin() {
        let problem = sphere_problem();
        let mut config = SolverConfig::default();
        config.rho_min = 1e-6;
        let out = optimize(&problem, &config).unwrap();
        assert_eq!(out.termination, TerminationReason::RhoMin);
        assert!(out.x_best.norm() <= 1e-4, "x_best = {:?}", out.x_best);
        assert!(out.f_best <= 1e-8);
    }

    #[test]
    fn constrained_disk_reaches_boundary_optimum() {
        let problem = disk_problem();
        let mut config = SolverConfig::default();
        config.rho_min = 1e-6;
        let out = optimize(&problem, &config).unwrap();
        let target = DVector::from_vec(vec![-(0.5f64.sqrt()), -(0.5f64.sqrt())]);
        assert!(
            (&out.x_best - &target).norm() <= 1e-3,
            "x_best = {:?}",
            out.x_best
        );
        // Every recorded iterate is truly feasible.
        for rec in &out.history {
            let (_, c) = problem.eval_raw(&rec.x);
            assert!(c[0] <= 1e-12, "iterate {:?} infeasible: {}", rec.x, c[0]);
        }
    }

    #[test]
    fn tiny_gradient_triggers_criticality_shrinks() {
        // alpha = 1e-3 at the start, well under eps_c: the first events must
        // be criticality shrinks at rho = 0.06, 0.036, ...
        let problem = BlackBoxProblem::new("shallow", 2, 0, vec![0.0, 0.0], |x| {
            (1e-3 * x[0], vec![])
        });
        let mut config = SolverConfig::default();
        config.rho_min = 1e-4;
        let out = optimize(&problem, &config).unwrap();
        let first = &out.history[0];
        assert_eq!(first.status, IterationStatus::CriticalityShrink);
        assert!((first.rho - 0.06).abs() < 1e-12, "rho = {}", first.rho);
        assert!((first.alpha.unwrap() - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let problem = BlackBoxProblem::new("bad", 2, 1, vec![2.0, 0.0], |x| {
            (x[0], vec![x[0] - 1.0])
        });
        match optimize(&problem, &SolverConfig::default()) {
            Err(SolverError::InfeasibleStart(v)) => assert!((v - 1.0).abs() < 1e-12),
            other => panic!("expected InfeasibleStart, got {other:?}"),
        }
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let problem = sphere_problem();
        let mut config = SolverConfig::default();
        config.max_evals = 7;
        let out = optimize(&problem, &config).unwrap();
        assert_eq!(out.termination, TerminationReason::MaxEvals);
        assert!(out.counter.count() <= 7);
    }

    #[test]
    fn histories_are_byte_identical_for_equal_seeds() {
        let config = {
            let mut c = SolverConfig::default();
            c.rho_min = 1e-3;
            c.seed = 11;
            c
        };
        let run = |seed: u64| {
            let noisy =
                NoisyProblem::new(sphere_problem(), 1e-3, 0.0, seed).into_problem();
            let out = optimize(&noisy, &config).unwrap();
            serialize_history(&noisy, &config, &out)
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn history_lines_have_fixed_arity() {
        let problem = disk_problem();
        let mut config = SolverConfig::default();
        config.rho_min = 1e-3;
        let out = optimize(&problem, &config).unwrap();
        let text = serialize_history(&problem, &config, &out);
        assert!(text.contains("# problem = disk"));
        assert!(text.contains("# eps_b = "));
        assert!(text.ends_with(&format!(
            "# terminated_by = {}\n",
            out.termination.as_str()
        )));
        let expected_fields = 6 + problem.n + 1 + problem.r;
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            assert_eq!(
                line.split(',').count(),
                expected_fields,
                "bad line: {line}"
            );
        }
    }
}
