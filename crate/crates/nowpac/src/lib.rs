//! NOWPAC: a derivative-free trust-region solver for nonlinear constrained
//! optimization of black-box functions.
//!
//! The solver minimizes f(x) subject to c_i(x) <= 0 where f and c are only
//! available through point evaluations (no gradients). Each iteration builds
//! minimum-Frobenius-norm quadratic surrogates of the objective and every
//! constraint from an interpolation set, offsets the constraint surrogates by
//! an inner boundary path that keeps trial points strictly inside the feasible
//! region, and solves a trust-region subproblem on the surrogates. A noise
//! indicator watches the surrogate Hessians at rejected steps and stops the
//! run early once evaluation noise dominates the model refinement.
//!
//! Entry points:
//! - [`optimize`] runs the solver on a [`BlackBoxProblem`] with a [`SolverConfig`].
//! - [`bench`] holds the benchmark problem library and the experiment runner.
//! - [`cli`] backs the `nowpac` binary (`solve`, `bench`, `sweep`).
//!
//! ```
//! use nowpac::{bench, optimize, SolverConfig};
//!
//! let problem = bench::rosenbrock();
//! let mut config = SolverConfig::default();
//! config.rho_min = 1e-3;
//! let outcome = optimize(&problem, &config).unwrap();
//! assert!((outcome.f_best - 0.0).abs() < 1e-2);
//! ```

pub mod bench;
pub mod blackbox;
pub mod cli;
pub mod feasibility;
pub mod solver;
pub mod subsolver;
pub mod surrogate;
mod trs;

pub use blackbox::{is_feasible, BlackBoxProblem, EvalCounter, EvalRecord, NoisyProblem};
pub use solver::{
    optimize, IterationRecord, IterationStatus, Outcome, SolverConfig, SolverError,
    TerminationReason,
};
pub use surrogate::QuadraticModel;
