//! Black-box problem representation and evaluation bookkeeping.
//!
//! A problem is f: ℝⁿ → ℝ plus r inequality constraints c_i(x) ≤ 0, all
//! evaluated together by one opaque callable. The solver never sees
//! derivatives; an optional analytic gradient is carried for benchmark
//! diagnostics only. Every solver-driven evaluation goes through
//! [`BlackBoxProblem::eval`] with an [`EvalCounter`], which is the single
//! source of truth for evaluation counts.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

type EvalFn = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;
/// Returns (∇f, J_c) with J_c of shape r × n.
type GradFn = dyn Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>) + Send + Sync;

#[derive(Debug, Clone)]
pub struct KnownOptimum {
    pub x_star: DVector<f64>,
    pub f_star: f64,
}

#[derive(Clone)]
pub struct BlackBoxProblem {
    pub name: String,
    pub n: usize,
    pub r: usize,
    pub x0: DVector<f64>,
    pub known_optimum: Option<KnownOptimum>,
    eval_fn: Arc<EvalFn>,
    grad_fn: Option<Arc<GradFn>>,
}

impl std::fmt::Debug for BlackBoxProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBoxProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("r", &self.r)
            .field("x0", &self.x0)
            .field("known_optimum", &self.known_optimum)
            .field("has_gradient", &self.grad_fn.is_some())
            .finish()
    }
}

impl BlackBoxProblem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        r: usize,
        x0: Vec<f64>,
        eval_fn: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(x0.len(), n, "x0 dimension mismatch");
        Self {
            name: name.into(),
            n,
            r,
            x0: DVector::from_vec(x0),
            known_optimum: None,
            eval_fn: Arc::new(eval_fn),
            grad_fn: None,
        }
    }

    pub fn with_gradient(
        mut self,
        grad_fn: impl Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.grad_fn = Some(Arc::new(grad_fn));
        self
    }

    pub fn with_optimum(mut self, x_star: Vec<f64>, f_star: f64) -> Self {
        assert_eq!(x_star.len(), self.n, "x_star dimension mismatch");
        self.known_optimum = Some(KnownOptimum {
            x_star: DVector::from_vec(x_star),
            f_star,
        });
        self
    }

    /// Counted evaluation: appends to the log and returns (f, c).
    pub fn eval(&self, x: &DVector<f64>, counter: &mut EvalCounter) -> (f64, Vec<f64>) {
        let (f, c) = self.eval_raw(x);
        counter.records.push(EvalRecord {
            x: x.clone(),
            f,
            c: c.clone(),
        });
        (f, c)
    }

    /// Uncounted evaluation, for diagnostics (error measurement, feasibility
    /// audits) that must not perturb the evaluation budget or a noise stream's
    /// alignment with it.
    pub fn eval_raw(&self, x: &DVector<f64>) -> (f64, Vec<f64>) {
        assert_eq!(x.len(), self.n, "dimension mismatch: x.len() != n");
        let (f, c) = (self.eval_fn)(x.as_slice());
        assert_eq!(c.len(), self.r, "constraint count mismatch");
        (f, c)
    }

    pub fn has_gradient(&self) -> bool {
        self.grad_fn.is_some()
    }

    /// Analytic (∇f, J_c); panics if the problem carries no gradient.
    pub fn gradient(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        assert_eq!(x.len(), self.n, "dimension mismatch: x.len() != n");
        let f = self
            .grad_fn
            .as_ref()
            .expect("problem has no analytic gradient");
        let (gf, jc) = f(x.as_slice());
        assert_eq!(gf.len(), self.n);
        assert_eq!(jc.nrows(), self.r);
        assert_eq!(jc.ncols(), self.n);
        (gf, jc)
    }
}

/// True iff c_i(x) ≤ -margin for every constraint. Uses an uncounted
/// evaluation; boundary points pass at margin 0.
pub fn is_feasible(problem: &BlackBoxProblem, x: &DVector<f64>, margin: f64) -> bool {
    let (_, c) = problem.eval_raw(x);
    c.iter().all(|&ci| ci <= -margin)
}

#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub x: DVector<f64>,
    pub f: f64,
    pub c: Vec<f64>,
}

/// Evaluation log; count() is always the log length. An optional limit lets
/// evaluation-hungry phases (geometry repair) stop cleanly at a budget
/// instead of overshooting it.
#[derive(Debug, Clone, Default)]
pub struct EvalCounter {
    records: Vec<EvalRecord>,
    limit: Option<usize>,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_limit(&mut self, limit: usize) {
        self.limit = Some(limit);
    }

    /// False once the evaluation budget is used up.
    pub fn budget_left(&self) -> bool {
        self.limit.is_none_or(|l| self.records.len() < l)
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    /// One line per evaluation: `k,x_1,..,x_n,f,c_1,..,c_r`, 17 significant
    /// digits so round-trips are exact.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, rec) in self.records.iter().enumerate() {
            write!(out, "{k}").unwrap();
            for xi in rec.x.iter() {
                write!(out, ",{xi:.16e}").unwrap();
            }
            write!(out, ",{:.16e}", rec.f).unwrap();
            for ci in &rec.c {
                write!(out, ",{ci:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Additive uniform noise wrapper: each evaluation perturbs f by
/// Uniform[-delta_f, delta_f] and every c_i by Uniform[-delta_c, delta_c],
/// drawn from a ChaCha stream so the k-th evaluation's noise is a pure
/// function of (seed, k). With both deltas zero the wrapped problem is
/// bitwise identical to the inner one.
pub struct NoisyProblem {
    pub inner: BlackBoxProblem,
    pub delta_f: f64,
    pub delta_c: f64,
    pub seed: u64,
}

impl NoisyProblem {
    pub fn new(inner: BlackBoxProblem, delta_f: f64, delta_c: f64, seed: u64) -> Self {
        assert!(delta_f >= 0.0 && delta_c >= 0.0, "noise amplitudes must be >= 0");
        Self {
            inner,
            delta_f,
            delta_c,
            seed,
        }
    }

    pub fn into_problem(self) -> BlackBoxProblem {
        let NoisyProblem {
            inner,
            delta_f,
            delta_c,
            seed,
        } = self;
        let r = inner.r;
        let base = inner.eval_fn.clone();
        let rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
        let eval_fn = move |x: &[f64]| -> (f64, Vec<f64>) {
            let (f, mut c) = base(x);
            let mut rng = rng.lock().unwrap();
            // Always draw 1 + r deviates so the stream position stays a
            // function of the evaluation index alone, independent of deltas.
            let uf: f64 = rng.random_range(-1.0..=1.0);
            let f_out = if delta_f > 0.0 { f + delta_f * uf } else { f };
            for ci in c.iter_mut() {
                let uc: f64 = rng.random_range(-1.0..=1.0);
                if delta_c > 0.0 {
                    *ci += delta_c * uc;
                }
            }
            debug_assert_eq!(c.len(), r);
            (f_out, c)
        };
        BlackBoxProblem {
            name: inner.name,
            n: inner.n,
            r: inner.r,
            x0: inner.x0,
            known_optimum: inner.known_optimum,
            eval_fn: Arc::new(eval_fn),
            grad_fn: inner.grad_fn,
        }
    }
}
