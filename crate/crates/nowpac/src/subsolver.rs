//! Trust-region subproblem solvers.
//!
//! Two subproblems are posed on the surrogates each iteration, both over the
//! offset-feasible set X = {s : m_i(s) + h(s) ≤ 0} ∩ {‖s‖ ≤ radius}:
//! the trial step minimizes the quadratic objective model, and the
//! criticality measure minimizes the linear objective ⟨g, d⟩.
//!
//! Without constraints both have closed forms (an exact quadratic-over-ball
//! solve, or a boundary step against the gradient). With constraints a
//! log-barrier interior-point method runs on the smooth constraints while the
//! ball is handled by projection: damped Newton (or gradient) inner steps,
//! barrier weight shrunk by 0.2 per stage, at most 200·n inner steps total.
//! Anything meeting the post-conditions (feasible, never worse than s = 0,
//! approximate KKT) would be conformant; this one is chosen for robustness on
//! the small dimensions the solver operates in.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::feasibility::{ibp_gradient, ibp_hessian, ibp_value};
use crate::surrogate::QuadraticModel;
use crate::trs;

/// Relative projected-gradient tolerance for declaring a subproblem solved.
pub const SUB_TOL: f64 = 1e-8;
/// Barrier weight reduction per stage.
const BARRIER_SHRINK: f64 = 0.2;
/// Inner-step budget multiplier: total damped steps are capped at 200·n.
const CAP_PER_DIM: usize = 200;
/// Absolute slack allowed on the s = 0 feasibility precondition.
const FEAS_SLACK: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SubsolverError {
    #[error("subproblem start s = 0 violates the model constraints by {0:.3e}")]
    InfeasibleStart(f64),
}

/// A once-differentiable constraint φ(s) ≤ 0 on the subproblem. The Hessian
/// is optional; without it the barrier falls back to Gauss-Newton curvature.
pub trait SmoothConstraint {
    fn value(&self, s: &DVector<f64>) -> f64;
    fn gradient(&self, s: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, _s: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Constraint surrogate plus the inner-boundary-path offset:
/// φ(s) = m(s) + eps_b‖s‖^(2/(1+p)).
pub struct OffsetModel<'a> {
    pub model: &'a QuadraticModel,
    pub eps_b: f64,
    pub p: f64,
}

impl SmoothConstraint for OffsetModel<'_> {
    fn value(&self, s: &DVector<f64>) -> f64 {
        self.model.value(s) + ibp_value(s, self.eps_b, self.p)
    }

    fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        self.model.gradient(s) + ibp_gradient(s, self.eps_b, self.p)
    }

    fn hessian(&self, s: &DVector<f64>) -> Option<DMatrix<f64>> {
        ibp_hessian(s, self.eps_b, self.p).map(|hb| &self.model.h + hb)
    }
}

pub enum Objective<'a> {
    Quadratic(&'a QuadraticModel),
    Linear(&'a DVector<f64>),
}

impl Objective<'_> {
    fn value(&self, s: &DVector<f64>) -> f64 {
        match self {
            Objective::Quadratic(m) => m.value(s),
            Objective::Linear(g) => g.dot(s),
        }
    }

    fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        match self {
            Objective::Quadratic(m) => m.gradient(s),
            Objective::Linear(g) => (*g).clone(),
        }
    }

    fn hessian(&self, n: usize) -> DMatrix<f64> {
        match self {
            Objective::Quadratic(m) => m.h.clone(),
            Objective::Linear(_) => DMatrix::zeros(n, n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub s: DVector<f64>,
    /// Objective model value at s.
    pub objective_value: f64,
    /// Offset constraint values φ_i(s).
    pub constraint_values: Vec<f64>,
    /// Indices with |φ_i(s)| within 1e-8 of zero.
    pub active_set: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

/// Trial-step subproblem: minimize the objective model over X ∩ ball.
pub struct SubproblemSpec<'a> {
    pub objective: &'a QuadraticModel,
    pub constraints: &'a [QuadraticModel],
    pub eps_b: f64,
    pub p: f64,
    pub radius: f64,
}

pub fn solve_trial_step(spec: &SubproblemSpec) -> Result<SubproblemSolution, SubsolverError> {
    let n = spec.objective.g.len();
    let cons: Vec<OffsetModel> = spec
        .constraints
        .iter()
        .map(|m| OffsetModel {
            model: m,
            eps_b: spec.eps_b,
            p: spec.p,
        })
        .collect();
    let refs: Vec<&dyn SmoothConstraint> = cons.iter().map(|c| c as &dyn SmoothConstraint).collect();
    solve_generic(&Objective::Quadratic(spec.objective), &refs, spec.radius, n)
}

/// Criticality measure α(ρ) = |min ⟨g, d⟩ over X ∩ ball(ρ)| / ρ. The solve is
/// run on the normalized gradient, making α exactly positively homogeneous
/// in g.
pub fn solve_criticality(
    g: &DVector<f64>,
    constraints: &[QuadraticModel],
    eps_b: f64,
    p: f64,
    radius: f64,
) -> Result<f64, SubsolverError> {
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return Ok(0.0);
    }
    let n = g.len();
    let ghat = g / gnorm;
    let cons: Vec<OffsetModel> = constraints
        .iter()
        .map(|m| OffsetModel {
            model: m,
            eps_b,
            p,
        })
        .collect();
    let refs: Vec<&dyn SmoothConstraint> = cons.iter().map(|c| c as &dyn SmoothConstraint).collect();
    let sol = solve_generic(&Objective::Linear(&ghat), &refs, radius, n)?;
    Ok(gnorm * sol.objective_value.min(0.0).abs() / radius)
}

/// Shared barrier driver, also used by the benchmark criticality oracle with
/// true-constraint closures. Preconditions: s = 0 satisfies every constraint
/// to within a small slack.
pub fn solve_generic(
    objective: &Objective,
    constraints: &[&dyn SmoothConstraint],
    radius: f64,
    n: usize,
) -> Result<SubproblemSolution, SubsolverError> {
    assert!(radius > 0.0, "radius must be positive");
    let zero = DVector::zeros(n);

    if constraints.is_empty() {
        return Ok(solve_unconstrained(objective, radius, n));
    }

    let phi0: Vec<f64> = constraints.iter().map(|c| c.value(&zero)).collect();
    let scale_c = phi0.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let worst0 = phi0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst0 > FEAS_SLACK * scale_c {
        return Err(SubsolverError::InfeasibleStart(worst0));
    }

    let scale_obj = objective.gradient(&zero).norm().max(1.0);
    let cap = CAP_PER_DIM * n;
    let mut spent = 0usize;

    // Multi-start: the strictified origin, plus the ball solution of the bare
    // objective pulled back into the strict interior. The second start lets
    // indefinite objectives reach boundary minima the first one may miss.
    let mut candidates: Vec<DVector<f64>> = vec![zero.clone()];
    let free = solve_unconstrained(objective, radius * (1.0 - 1e-12), n).s;
    if free.norm() > 1e-12 * radius {
        candidates.push(free);
    }

    let mut best: Option<SubproblemSolution> = None;
    for start in candidates {
        let budget = cap.saturating_sub(spent);
        if budget == 0 {
            break;
        }
        if let Some(run) = barrier_run(objective, constraints, radius, &start, scale_obj, budget) {
            spent += run.iterations;
            let better = match &best {
                None => true,
                Some(b) => run.objective_value < b.objective_value,
            };
            if better {
                best = Some(run);
            }
        }
    }

    let mut sol = match best {
        Some(s) => s,
        None => {
            // No start could be strictified: the interior is (numerically)
            // empty at this radius. s = 0 itself is feasible to within slack,
            // so "no step" is the honest answer.
            SubproblemSolution {
                s: zero.clone(),
                objective_value: objective.value(&zero),
                constraint_values: phi0.clone(),
                active_set: vec![],
                converged: false,
                iterations: 0,
            }
        }
    };
    sol.iterations = spent;

    // Never worse than no step: s = 0 is feasible within slack.
    if objective.value(&zero) < sol.objective_value {
        sol = SubproblemSolution {
            s: zero,
            objective_value: objective.value(&DVector::zeros(n)),
            constraint_values: phi0,
            active_set: vec![],
            converged: sol.converged,
            iterations: spent,
        };
    }

    let scale_act = scale_c.max(1.0);
    sol.active_set = sol
        .constraint_values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= 1e-8 * scale_act)
        .map(|(i, _)| i)
        .collect();
    Ok(sol)
}

fn solve_unconstrained(objective: &Objective, radius: f64, n: usize) -> SubproblemSolution {
    let s = match objective {
        Objective::Quadratic(m) => trs::minimize_quadratic_on_ball(&m.g, &m.h, radius).s,
        Objective::Linear(g) => {
            let gnorm = g.norm();
            if gnorm == 0.0 {
                DVector::zeros(n)
            } else {
                *g * (-radius / gnorm)
            }
        }
    };
    SubproblemSolution {
        objective_value: objective.value(&s),
        constraint_values: vec![],
        active_set: vec![],
        converged: true,
        iterations: 0,
        s,
    }
}

fn project(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    let nrm = v.norm();
    if nrm <= radius {
        v.clone()
    } else {
        v * (radius / nrm)
    }
}

/// Pushes a point into the strict interior of the constraints by descending
/// the worst constraint values. Returns None if no strictly interior point
/// is found near the start.
fn strictify(
    constraints: &[&dyn SmoothConstraint],
    start: &DVector<f64>,
    radius: f64,
    margin: f64,
) -> Option<DVector<f64>> {
    let mut s = project(start, radius);
    // A start away from the origin may be badly infeasible; pull it toward
    // the origin first, which is feasible to within slack.
    for _ in 0..60 {
        let worst = constraints
            .iter()
            .map(|c| c.value(&s))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst < -margin {
            return Some(s);
        }
        if s.norm() < 1e-14 {
            break;
        }
        s *= 0.7;
    }
    // Descend the near-active constraints from wherever the pullback ended.
    for _ in 0..60 {
        let vals: Vec<f64> = constraints.iter().map(|c| c.value(&s)).collect();
        let worst = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if worst < -margin {
            return Some(s);
        }
        let mut dir = DVector::zeros(s.len());
        for (i, c) in constraints.iter().enumerate() {
            if vals[i] >= -10.0 * margin {
                let g = c.gradient(&s);
                let gn = g.norm();
                if gn > 0.0 {
                    dir -= g / gn;
                }
            }
        }
        let dn = dir.norm();
        if dn == 0.0 {
            return None;
        }
        dir /= dn;
        let mut accepted = false;
        let mut t = 0.5 * radius;
        for _ in 0..50 {
            let cand = project(&(&s + &dir * t), radius * (1.0 - 1e-12));
            let w = constraints
                .iter()
                .map(|c| c.value(&cand))
                .fold(f64::NEG_INFINITY, f64::max);
            if w < worst - 0.1 * t * dn.min(1.0) || w < -margin {
                s = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

struct BarrierEval {
    value: f64,
    grad: DVector<f64>,
}

fn barrier_eval(
    objective: &Objective,
    constraints: &[&dyn SmoothConstraint],
    mu: f64,
    s: &DVector<f64>,
) -> Option<BarrierEval> {
    let mut value = objective.value(s);
    let mut grad = objective.gradient(s);
    for c in constraints {
        let v = c.value(s);
        if v >= 0.0 {
            return None;
        }
        value -= mu * (-v).ln();
        grad -= c.gradient(s) * (mu / v);
    }
    Some(BarrierEval { value, grad })
}

/// One barrier run from one start. Returns the best feasible point seen.
fn barrier_run(
    objective: &Objective,
    constraints: &[&dyn SmoothConstraint],
    radius: f64,
    start: &DVector<f64>,
    scale_obj: f64,
    budget: usize,
) -> Option<SubproblemSolution> {
    let n = start.len();
    let inner_radius = radius * (1.0 - 1e-12);
    let margin = 1e-11 * scale_obj.max(1.0);
    let mut s = strictify(constraints, start, inner_radius, margin)?;

    let mut s_best = s.clone();
    let mut f_best = objective.value(&s);

    let mu_end = 1e-12 * scale_obj * radius;
    let mut mu = 0.1 * scale_obj * radius;
    let mut spent = 0usize;
    let mut last_pg = f64::INFINITY;

    'stages: while mu > mu_end {
        let stage_tol = (0.01 * mu / radius).max(0.1 * SUB_TOL * scale_obj);
        for _ in 0..60 {
            if spent >= budget {
                break 'stages;
            }
            spent += 1;
            let be = match barrier_eval(objective, constraints, mu, &s) {
                Some(be) => be,
                None => break 'stages, // numerical escape from the interior
            };
            let pg = (&project(&(&s - &be.grad), inner_radius) - &s).norm();
            last_pg = pg;
            if pg <= stage_tol {
                break;
            }

            // Newton system with barrier curvature; missing constraint
            // Hessians degrade gracefully to Gauss-Newton terms.
            let mut m = objective.hessian(n);
            for c in constraints.iter() {
                let v = c.value(&s);
                let g = c.gradient(&s);
                m += &g * g.transpose() * (mu / (v * v));
                if let Some(h) = c.hessian(&s) {
                    m += h * (-mu / v);
                }
            }
            let mut step = None;
            let trace = m.trace().abs().max(1.0);
            let mut nu = 0.0;
            for _ in 0..12 {
                let reg = &m + DMatrix::identity(n, n) * nu;
                if let Some(chol) = reg.cholesky() {
                    let d = chol.solve(&(-&be.grad));
                    if d.dot(&be.grad) < 0.0 {
                        step = Some(d);
                        break;
                    }
                }
                nu = if nu == 0.0 { 1e-10 * trace } else { nu * 10.0 };
            }
            let d = step.unwrap_or_else(|| -&be.grad);

            let mut advanced = false;
            let mut t = 1.0;
            for _ in 0..45 {
                let cand = project(&(&s + &d * t), inner_radius);
                if let Some(cand_eval) = barrier_eval(objective, constraints, mu, &cand) {
                    if cand_eval.value < be.value {
                        s = cand;
                        advanced = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !advanced {
                break; // stage converged as far as the line search allows
            }
            let fs = objective.value(&s);
            if fs < f_best {
                f_best = fs;
                s_best = s.clone();
            }
        }
        mu *= BARRIER_SHRINK;
    }

    let fs = objective.value(&s);
    if fs < f_best {
        f_best = fs;
        s_best = s.clone();
    }
    let converged = last_pg <= SUB_TOL * scale_obj;
    let constraint_values: Vec<f64> = constraints.iter().map(|c| c.value(&s_best)).collect();
    Some(SubproblemSolution {
        s: s_best,
        objective_value: f_best,
        constraint_values,
        active_set: vec![],
        converged,
        iterations: spent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn linear_model(g: Vec<f64>, c0: f64) -> QuadraticModel {
        let n = g.len();
        QuadraticModel::new(DVector::zeros(n), c0, DVector::from_vec(g), DMatrix::zeros(n, n))
    }

    #[test]
    fn unconstrained_criticality_is_gradient_norm() {
        let g = DVector::from_vec(vec![3.0, 4.0]);
        let alpha = solve_criticality(&g, &[], 10.0, 0.0, 0.1).unwrap();
        assert!((alpha - 5.0).abs() < 1e-12);
    }

    #[test]
    fn criticality_zero_at_boundary_critical_point() {
        // Constraint m(s) = s1 with the quadratic offset: feasible set has
        // s1 ≤ 0, objective gradient (-1, 0) wants s1 large. α must be 0.
        let cons = vec![linear_model(vec![1.0, 0.0], 0.0)];
        let g = DVector::from_vec(vec![-1.0, 0.0]);
        let alpha = solve_criticality(&g, &cons, 10.0, 0.0, 0.05).unwrap();
        assert!(alpha.abs() < 1e-6, "alpha = {alpha}");
    }

    #[test]
    fn criticality_ignores_inactive_constraints() {
        let cons = vec![linear_model(vec![1.0, 0.0], -100.0)];
        let g = DVector::from_vec(vec![3.0, 4.0]);
        let alpha = solve_criticality(&g, &cons, 10.0, 0.0, 0.1).unwrap();
        assert!((alpha - 5.0).abs() < 1e-6, "alpha = {alpha}");
    }

    #[test]
    fn criticality_is_positively_homogeneous() {
        let cons = vec![linear_model(vec![1.0, 0.5], -0.02)];
        let g = DVector::from_vec(vec![0.3, -0.7]);
        let a1 = solve_criticality(&g, &cons, 10.0, 0.0, 0.1).unwrap();
        let g2 = &g * 37.5;
        let a2 = solve_criticality(&g2, &cons, 10.0, 0.0, 0.1).unwrap();
        assert!((a2 - 37.5 * a1).abs() < 1e-9 * a2.abs().max(1.0));
    }

    #[test]
    fn trial_step_matches_analytic_constrained_minimum() {
        // minimize s1 s.t. s1 - 0.05 + 10‖s‖² ≤ 0, ‖s‖ ≤ 0.5.
        // KKT on the constraint boundary: s = (-(1+√3)/20, 0).
        let obj = linear_model(vec![1.0, 0.0], 0.0);
        let cons = vec![linear_model(vec![1.0, 0.0], -0.05)];
        let spec = SubproblemSpec {
            objective: &obj,
            constraints: &cons,
            eps_b: 10.0,
            p: 0.0,
            radius: 0.5,
        };
        let sol = solve_trial_step(&spec).unwrap();
        let expected = -(1.0 + 3.0_f64.sqrt()) / 20.0;
        assert!(
            (sol.s[0] - expected).abs() < 1e-6,
            "s1 = {} vs {}",
            sol.s[0],
            expected
        );
        assert!(sol.s[1].abs() < 1e-6);
        assert!((sol.objective_value - expected).abs() < 1e-6);
        assert_eq!(sol.active_set, vec![0]);
    }

    #[test]
    fn trial_step_hits_ball_when_constraint_is_slack() {
        // Same constraint, radius 0.1: the ball binds first at s = (-0.1, 0).
        let obj = linear_model(vec![1.0, 0.0], 0.0);
        let cons = vec![linear_model(vec![1.0, 0.0], -0.05)];
        let spec = SubproblemSpec {
            objective: &obj,
            constraints: &cons,
            eps_b: 10.0,
            p: 0.0,
            radius: 0.1,
        };
        let sol = solve_trial_step(&spec).unwrap();
        assert!((sol.s[0] + 0.1).abs() < 1e-6, "s = {}", sol.s[0]);
        assert!((sol.objective_value + 0.1).abs() < 1e-6);
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn infeasible_start_is_reported() {
        let cons = vec![linear_model(vec![1.0, 0.0], 0.5)];
        let g = DVector::from_vec(vec![1.0, 0.0]);
        match solve_criticality(&g, &cons, 10.0, 0.0, 0.1) {
            Err(SubsolverError::InfeasibleStart(v)) => assert!((v - 0.5).abs() < 1e-12),
            other => panic!("expected InfeasibleStart, got {other:?}"),
        }
    }

    /// Grid-search oracle over the 2-D ball at the given resolution: the
    /// reference global minimum for randomized instances.
    fn grid_oracle(
        obj: &QuadraticModel,
        cons: &[QuadraticModel],
        eps_b: f64,
        radius: f64,
        step: f64,
    ) -> f64 {
        let mut best = f64::INFINITY;
        let k = (radius / step).ceil() as i64;
        for i in -k..=k {
            for j in -k..=k {
                let s = DVector::from_vec(vec![i as f64 * step, j as f64 * step]);
                if s.norm() > radius {
                    continue;
                }
                let h = eps_b * s.norm_squared();
                if cons.iter().any(|c| c.value(&s) + h > 0.0) {
                    continue;
                }
                best = best.min(obj.value(&s));
            }
        }
        // s = 0 is always in the grid, so best is finite.
        best
    }

    fn random_model(rng: &mut ChaCha8Rng, c0_range: (f64, f64)) -> QuadraticModel {
        let c0 = rng.random_range(c0_range.0..c0_range.1);
        let g = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
        let h = (&a + a.transpose()) * 0.5;
        QuadraticModel::new(DVector::zeros(2), c0, g, h)
    }

    #[test]
    fn random_instances_match_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..12 {
            let obj = random_model(&mut rng, (-1.0, 1.0));
            let ncons = 1 + (trial % 2);
            let cons: Vec<QuadraticModel> = (0..ncons)
                .map(|_| random_model(&mut rng, (-1.0, -0.05)))
                .collect();
            let eps_b = rng.random_range(1.0..15.0);
            let radius = rng.random_range(0.1..0.4);
            let spec = SubproblemSpec {
                objective: &obj,
                constraints: &cons,
                eps_b,
                p: 0.0,
                radius,
            };
            let sol = solve_trial_step(&spec).unwrap();
            assert!(sol.s.norm() <= radius * (1.0 + 1e-10), "trial {trial}");
            for v in &sol.constraint_values {
                assert!(*v <= 1e-8, "trial {trial}: constraint {v}");
            }
            assert!(sol.objective_value <= obj.value(&DVector::zeros(2)) + 1e-12);
            let oracle = grid_oracle(&obj, &cons, eps_b, radius, 1e-3);
            assert!(
                sol.objective_value <= oracle + 2e-2,
                "trial {trial}: solver {} vs oracle {}",
                sol.objective_value,
                oracle
            );
        }
    }
}
