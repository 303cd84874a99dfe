//! Constrained solve: an anisotropic exponential objective inside two
//! nonlinear inequality constraints. Every iterate the solver accepts stays
//! strictly feasible, which the audit at the end double-checks against the
//! true constraints.

use nowpac::bench::problems;
use nowpac::{optimize, SolverConfig};

fn main() {
    let problem = problems::aniso_exp();
    let mut config = SolverConfig::default();
    config.rho_min = 1e-5;

    let out = optimize(&problem, &config).expect("solve failed");

    println!("evaluations   : {}", out.counter.count());
    println!("terminated by : {}", out.termination.as_str());
    println!("f_best        : {:.8}", out.f_best);
    print!("x_best        :");
    for xi in out.x_best.iter() {
        print!(" {xi:+.6}");
    }
    println!();

    let (_, c) = problem.eval_raw(&out.x_best);
    for (i, ci) in c.iter().enumerate() {
        println!("c_{}(x_best)   : {ci:+.3e}", i + 1);
    }

    let mut worst: f64 = f64::NEG_INFINITY;
    for rec in &out.history {
        let (_, c) = problem.eval_raw(&rec.x);
        worst = c.iter().cloned().fold(worst, f64::max);
    }
    println!("worst constraint value over all iterates: {worst:+.3e} (feasible iff <= 0)");
}
