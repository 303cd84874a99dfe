//! The exact criticality diagnostic: for catalogue problems with analytic
//! gradients, the oracle measures the best possible linearized decrease over
//! offset-feasible unit directions. It equals the gradient norm when no
//! constraint interferes and drops to zero at a constrained optimum, which
//! makes it a ground-truth convergence check for solver output.

use nowpac::bench::{exact_criticality_oracle, problems};
use nowpac::{optimize, SolverConfig};

fn main() {
    let eps_b = 10.0;

    for name in ["rosenbrock", "hs29", "hs43", "hs227"] {
        let problem = problems::problem_by_name(name).unwrap();
        let at_start = exact_criticality_oracle(&problem, &problem.x0, eps_b, 0.0).unwrap();

        let mut config = SolverConfig::default();
        config.rho_min = 1e-5;
        let out = optimize(&problem, &config).expect("solve failed");
        let at_solution = exact_criticality_oracle(&problem, &out.x_best, eps_b, 0.0).unwrap();

        println!(
            "{name:<11} criticality at x0 = {at_start:>10.4}   at solution = {at_solution:.3e}"
        );
    }
}
