//! Quadratic surrogate models built from interpolation sets.
//!
//! Models are minimum-Frobenius-norm quadratics: among all quadratics that
//! interpolate the sample values, pick the one whose Hessian has the smallest
//! Frobenius norm. The construction solves one saddle-point system per set
//! geometry (shared across the objective and all constraints) in coordinates
//! shifted to the set's center and scaled by the trust-region radius.
//!
//! Set quality is measured by the poisedness constant Λ, the largest sup-norm
//! of any Lagrange polynomial of the set over the trust ball. Geometry
//! improvement swaps the worst-offending point for the maximizer of its
//! Lagrange polynomial until Λ falls under [`LAMBDA_THRESHOLD`].

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::blackbox::{BlackBoxProblem, EvalCounter};
use crate::trs;

/// Poisedness bound under which a set counts as fully linear.
pub const LAMBDA_THRESHOLD: f64 = 100.0;
/// Points farther than this multiple of the radius from the center disqualify
/// the set from being fully linear.
pub const SCALE_FACTOR: f64 = 2.0;
/// Condition-estimate limit on the interpolation saddle system.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("interpolation geometry is singular (condition estimate {0:.3e})")]
    SingularGeometry(f64),
    #[error("geometry improvement stalled: poisedness {0:.3e} after {1} replacements")]
    ImprovementStalled(f64, usize),
}

/// Quadratic m(center + s) = c0 + gᵀs + ½ sᵀHs, queried in offsets s from its
/// center. H is symmetric by construction.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub center: DVector<f64>,
    pub c0: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl QuadraticModel {
    pub fn new(center: DVector<f64>, c0: f64, g: DVector<f64>, h: DMatrix<f64>) -> Self {
        debug_assert_eq!(g.len(), h.nrows());
        debug_assert_eq!(h.nrows(), h.ncols());
        Self { center, c0, g, h }
    }

    pub fn value(&self, s: &DVector<f64>) -> f64 {
        self.c0 + self.g.dot(s) + 0.5 * (&self.h * s).dot(s)
    }

    pub fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.g + &self.h * s
    }

    /// Spectral norm of H.
    pub fn hessian_norm(&self) -> f64 {
        if self.h.amax() == 0.0 {
            return 0.0;
        }
        self.h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0_f64, |a, &l| a.max(l.abs()))
    }
}

/// Sample points with their recorded objective and constraint values. The
/// center (current iterate) is always index 0; points stay pairwise distinct.
#[derive(Debug, Clone)]
pub struct InterpolationSet {
    points: Vec<DVector<f64>>,
    fvals: Vec<f64>,
    cvals: Vec<Vec<f64>>,
}

/// Maximum points carried: the dimension of the full quadratic space.
pub fn max_points(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

impl InterpolationSet {
    pub fn new(center: DVector<f64>, f: f64, c: Vec<f64>) -> Self {
        Self {
            points: vec![center],
            fvals: vec![f],
            cvals: vec![c],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.points[0]
    }

    pub fn center_f(&self) -> f64 {
        self.fvals[0]
    }

    pub fn center_c(&self) -> &[f64] {
        &self.cvals[0]
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Inserts unless the point nearly coincides with an existing one.
    /// Returns whether it was added.
    pub fn insert(&mut self, point: DVector<f64>, f: f64, c: Vec<f64>) -> bool {
        let tol = 1e-12 * (1.0 + point.norm());
        if self.points.iter().any(|p| (p - &point).norm() <= tol) {
            return false;
        }
        self.points.push(point);
        self.fvals.push(f);
        self.cvals.push(c);
        true
    }

    fn remove(&mut self, idx: usize) {
        assert!(idx != 0, "the center cannot be removed");
        self.points.remove(idx);
        self.fvals.remove(idx);
        self.cvals.remove(idx);
    }

    fn replace(&mut self, idx: usize, point: DVector<f64>, f: f64, c: Vec<f64>) {
        assert!(idx != 0, "the center cannot be replaced");
        self.points[idx] = point;
        self.fvals[idx] = f;
        self.cvals[idx] = c;
    }

    fn make_center(&mut self, idx: usize) {
        self.points.swap(0, idx);
        self.fvals.swap(0, idx);
        self.cvals.swap(0, idx);
    }

    fn farthest_from_center(&self) -> Option<usize> {
        (1..self.len()).max_by(|&a, &b| {
            let da = (&self.points[a] - self.center()).norm();
            let db = (&self.points[b] - self.center()).norm();
            da.partial_cmp(&db).unwrap()
        })
    }

    pub fn max_distance_from_center(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p - self.center()).norm())
            .fold(0.0, f64::max)
    }
}

/// Inserts the evaluated trial point and, on acceptance, promotes it to
/// center. Keeps the set at most [`max_points`] big by dropping the point
/// farthest from the (possibly new) center.
pub fn update_set_after_step(
    set: &mut InterpolationSet,
    new_point: DVector<f64>,
    f_new: f64,
    c_new: Vec<f64>,
    accepted: bool,
) {
    let n = set.dim();
    let inserted = set.insert(new_point.clone(), f_new, c_new);
    if accepted {
        if inserted {
            let idx = set.len() - 1;
            set.make_center(idx);
        } else if let Some(idx) = set
            .points
            .iter()
            .position(|p| (p - &new_point).norm() <= 1e-12 * (1.0 + new_point.norm()))
        {
            set.make_center(idx);
        }
    }
    while set.len() > max_points(n) {
        if let Some(idx) = set.farthest_from_center() {
            set.remove(idx);
        } else {
            break;
        }
    }
}

/// Saddle-point factorization shared by every model built on one geometry.
struct MfnSystem {
    scaled: Vec<DVector<f64>>,
    lu: nalgebra::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    m: usize,
    n: usize,
}

fn assemble_mfn(set: &InterpolationSet, rho: f64) -> Result<MfnSystem, SurrogateError> {
    assert!(rho > 0.0, "radius must be positive");
    let m = set.len();
    let n = set.dim();
    let center = set.center().clone();
    let scaled: Vec<DVector<f64>> = set
        .points()
        .iter()
        .map(|p| (p - &center) / rho)
        .collect();

    let dim = m + n + 1;
    let mut w = DMatrix::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let dot = scaled[i].dot(&scaled[j]);
            w[(i, j)] = 0.5 * dot * dot;
        }
        w[(i, m)] = 1.0;
        w[(m, i)] = 1.0;
        for k in 0..n {
            w[(i, m + 1 + k)] = scaled[i][k];
            w[(m + 1 + k, i)] = scaled[i][k];
        }
    }

    let fro = w.norm();
    let lu = w.full_piv_lu();
    if !lu.is_invertible() {
        return Err(SurrogateError::SingularGeometry(f64::INFINITY));
    }
    // Inverse power iteration estimates the smallest singular value (W is
    // symmetric, so that is the smallest |eigenvalue|).
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + 0.01 * i as f64);
    v /= v.norm();
    let mut sigma_min = f64::INFINITY;
    for _ in 0..8 {
        let u = match lu.solve(&v) {
            Some(u) => u,
            None => return Err(SurrogateError::SingularGeometry(f64::INFINITY)),
        };
        let nu = u.norm();
        if !nu.is_finite() || nu == 0.0 {
            return Err(SurrogateError::SingularGeometry(f64::INFINITY));
        }
        sigma_min = 1.0 / nu;
        v = u / nu;
    }
    let condition = fro / sigma_min.max(1e-300);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(SurrogateError::SingularGeometry(condition));
    }
    Ok(MfnSystem {
        scaled,
        lu,
        condition,
        m,
        n,
    })
}

impl MfnSystem {
    /// Solves for one value vector and unscales back to offset coordinates.
    fn model_for(&self, center: &DVector<f64>, values: &[f64], rho: f64) -> QuadraticModel {
        let MfnSystem { m, n, .. } = *self;
        let mut rhs = DVector::zeros(m + n + 1);
        for i in 0..m {
            rhs[i] = values[i];
        }
        let z = self.lu.solve(&rhs).expect("factorization already verified");
        let c0 = z[m];
        let ghat = DVector::from_fn(n, |k, _| z[m + 1 + k]);
        let mut hhat = DMatrix::zeros(n, n);
        for i in 0..m {
            let yi = &self.scaled[i];
            hhat += yi * yi.transpose() * z[i];
        }
        QuadraticModel::new(center.clone(), c0, ghat / rho, hhat / (rho * rho))
    }
}

/// Models for the objective and every constraint from one shared
/// factorization. Order: index 0 is f, then c_1..c_r.
pub fn build_models(
    set: &InterpolationSet,
    rho: f64,
) -> Result<Vec<QuadraticModel>, SurrogateError> {
    let sys = assemble_mfn(set, rho)?;
    let center = set.center().clone();
    let r = set.center_c().len();
    let mut models = Vec::with_capacity(1 + r);
    models.push(sys.model_for(&center, &set.fvals, rho));
    for ci in 0..r {
        let vals: Vec<f64> = set.cvals.iter().map(|c| c[ci]).collect();
        models.push(sys.model_for(&center, &vals, rho));
    }
    // Interpolation must hold on every model; a violation means the condition
    // estimate let a near-singular geometry through.
    for (mi, model) in models.iter().enumerate() {
        for (j, p) in set.points().iter().enumerate() {
            let v = if mi == 0 {
                set.fvals[j]
            } else {
                set.cvals[j][mi - 1]
            };
            let s = p - &center;
            if (model.value(&s) - v).abs() > 1e-8 * v.abs().max(1.0) {
                return Err(SurrogateError::SingularGeometry(sys.condition));
            }
        }
    }
    Ok(models)
}

/// Model of the objective alone.
pub fn build_mfn_model(
    set: &InterpolationSet,
    rho: f64,
) -> Result<QuadraticModel, SurrogateError> {
    let sys = assemble_mfn(set, rho)?;
    Ok(sys.model_for(&set.center().clone(), &set.fvals, rho))
}

/// Lagrange polynomials of the set: ℓ_i(y_j) = δ_ij, each built as an MFN
/// quadratic on the same geometry.
pub fn lagrange_polynomials(
    set: &InterpolationSet,
    rho: f64,
) -> Result<Vec<QuadraticModel>, SurrogateError> {
    let sys = assemble_mfn(set, rho)?;
    let center = set.center().clone();
    let m = set.len();
    Ok((0..m)
        .map(|i| {
            let mut values = vec![0.0; m];
            values[i] = 1.0;
            sys.model_for(&center, &values, rho)
        })
        .collect())
}

/// Per-point maxima of |ℓ_i| over the ball of the given radius around the
/// center, with the maximizing offsets.
fn lagrange_maxima(
    set: &InterpolationSet,
    rho: f64,
) -> Result<Vec<(f64, DVector<f64>)>, SurrogateError> {
    let polys = lagrange_polynomials(set, rho)?;
    Ok(polys
        .iter()
        .map(|l| {
            let (val, s) = trs::max_abs_quadratic_on_ball(l.c0, &l.g, &l.h, rho);
            (val, s)
        })
        .collect())
}

/// Poisedness constant Λ of the set over the ball of the given radius.
pub fn poisedness(set: &InterpolationSet, rho: f64) -> Result<f64, SurrogateError> {
    let maxima = lagrange_maxima(set, rho)?;
    Ok(maxima.iter().map(|(v, _)| *v).fold(0.0, f64::max))
}

/// Whether the set supports fully linear models on the ball of radius rho:
/// enough points, none straying past SCALE_FACTOR·rho, and Λ under threshold.
pub fn is_fully_linear(set: &InterpolationSet, rho: f64) -> bool {
    if set.len() < set.dim() + 1 {
        return false;
    }
    if set.max_distance_from_center() > SCALE_FACTOR * rho * (1.0 + 1e-12) {
        return false;
    }
    matches!(poisedness(set, rho), Ok(l) if l <= LAMBDA_THRESHOLD)
}

/// Repairs the set until it is fully linear on the ball of radius rho:
/// drops far points, refills to at least n+1 points with a coordinate
/// simplex, then swaps worst points for Lagrange maximizers. Each new point
/// costs one problem evaluation.
pub fn ensure_fully_linear(
    set: &mut InterpolationSet,
    problem: &BlackBoxProblem,
    counter: &mut EvalCounter,
    rho: f64,
) -> Result<(), SurrogateError> {
    let n = set.dim();

    let mut idx = 1;
    while idx < set.len() {
        let far = (&set.points[idx] - set.center()).norm() > SCALE_FACTOR * rho * (1.0 + 1e-12);
        if far && set.len() > 1 {
            set.remove(idx);
        } else {
            idx += 1;
        }
    }

    // Points nearly coincident at the current radius poison the
    // factorization long before the poisedness measure sees them; keep the
    // earlier of any such pair.
    let mut idx = 1;
    while idx < set.len() {
        let pi = set.points[idx].clone();
        let dup = set.points[..idx]
            .iter()
            .any(|q| (q - &pi).norm() <= 1e-4 * rho);
        if dup {
            set.remove(idx);
        } else {
            idx += 1;
        }
    }

    if set.len() < n + 1 {
        fill_simplex(set, problem, counter, rho);
    }

    let step_cap = 2 * max_points(n);
    let mut last_lambda = f64::INFINITY;
    let mut rebuilt = false;
    for step in 0..=step_cap {
        if !counter.budget_left() {
            return Ok(());
        }
        let maxima = match lagrange_maxima(set, rho) {
            Ok(m) => m,
            Err(SurrogateError::SingularGeometry(_)) if !rebuilt => {
                // The set defeats the factorization outright (say, exactly
                // collinear points). Restart from the center with a fresh
                // simplex; its polynomials are always well defined.
                rebuilt = true;
                while set.len() > 1 {
                    set.remove(1);
                }
                fill_simplex(set, problem, counter, rho);
                continue;
            }
            Err(e) => return Err(e),
        };
        let lambda = maxima.iter().map(|(v, _)| *v).fold(0.0, f64::max);
        last_lambda = lambda;
        if lambda <= LAMBDA_THRESHOLD {
            return Ok(());
        }
        if step == step_cap {
            break;
        }
        // Replace the worst non-center point by the maximizer of its own
        // Lagrange polynomial inside the ball.
        let (worst, &(_, ref s_new)) = maxima
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap())
            .expect("set has non-center points here");
        let p_new = set.center() + s_new;
        let tol = 1e-12 * (1.0 + p_new.norm());
        if set.points.iter().any(|q| (q - &p_new).norm() <= tol) {
            // Maximizer collides with an existing point; geometry cannot be
            // improved along this polynomial.
            return Err(SurrogateError::ImprovementStalled(lambda, step));
        }
        if !counter.budget_left() {
            // Out of evaluations; hand the set back as-is and let the caller
            // notice the exhausted budget.
            return Ok(());
        }
        let (f, c) = problem.eval(&p_new, counter);
        set.replace(worst, p_new, f, c);
    }
    Err(SurrogateError::ImprovementStalled(last_lambda, step_cap))
}

/// Adds coordinate steps of length rho off the center until the set can
/// support a linear model, reflecting to the other side of any direction
/// already occupied.
fn fill_simplex(
    set: &mut InterpolationSet,
    problem: &BlackBoxProblem,
    counter: &mut EvalCounter,
    rho: f64,
) {
    let n = set.dim();
    let center = set.center().clone();
    for j in 0..n {
        if set.len() >= n + 1 || !counter.budget_left() {
            break;
        }
        let mut p = center.clone();
        p[j] += rho;
        let tol = 1e-12 * (1.0 + p.norm());
        if set.points.iter().any(|q| (q - &p).norm() <= tol) {
            p[j] -= 2.0 * rho;
        }
        let (f, c) = problem.eval(&p, counter);
        set.insert(p, f, c);
    }
}
