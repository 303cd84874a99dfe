//! Minimal solve: Rosenbrock valley with default settings, then the
//! iteration history written to a file.

use nowpac::bench::problems;
use nowpac::solver::serialize_history;
use nowpac::{optimize, SolverConfig};

fn main() {
    let problem = problems::rosenbrock();
    let mut config = SolverConfig::default();
    config.rho_min = 1e-5;

    let out = optimize(&problem, &config).expect("solve failed");

    println!("problem        : {}", problem.name);
    println!("evaluations    : {}", out.counter.count());
    println!("iterations     : {}", out.history.len());
    println!("terminated by  : {}", out.termination.as_str());
    println!("x_best         : [{:.6}, {:.6}]", out.x_best[0], out.x_best[1]);
    println!("f_best         : {:.6e}", out.f_best);
    if let Some(opt) = &problem.known_optimum {
        println!("d_x to optimum : {:.3e}", (&out.x_best - &opt.x_star).norm());
    }

    let path = std::env::temp_dir().join("rosenbrock.hist");
    std::fs::write(&path, serialize_history(&problem, &config, &out)).unwrap();
    println!("history        : {}", path.display());
}
