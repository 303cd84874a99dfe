//! Solving your own problem: wrap any closure returning (f, constraint
//! values) in a BlackBoxProblem. Here a quadratic bowl is pushed against a
//! linear cut and a disk boundary; the solver needs nothing but point
//! evaluations.

use nowpac::{optimize, BlackBoxProblem, SolverConfig};

fn main() {
    // minimize (x1-2)^2 + (x2-1)^2
    // s.t.     x1 + x2 - 2 <= 0        (linear cut)
    //          x1^2 + x2^2 - 2.5 <= 0  (disk)
    // Optimum sits on the cut at (1.5, 0.5).
    let problem = BlackBoxProblem::new("bowl-with-cut", 2, 2, vec![0.0, 0.0], |x| {
        let f = (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2);
        let c = vec![x[0] + x[1] - 2.0, x[0] * x[0] + x[1] * x[1] - 2.5];
        (f, c)
    })
    .with_optimum(vec![1.5, 0.5], 0.5);

    let mut config = SolverConfig::default();
    config.rho_min = 1e-6;

    let out = optimize(&problem, &config).expect("solve failed");

    println!("evaluations   : {}", out.counter.count());
    println!("terminated by : {}", out.termination.as_str());
    println!("x_best        : [{:.6}, {:.6}]", out.x_best[0], out.x_best[1]);
    println!("f_best        : {:.8}", out.f_best);

    let opt = problem.known_optimum.as_ref().unwrap();
    println!("d_x           : {:.3e}", (&out.x_best - &opt.x_star).norm());
    println!("d_f           : {:.3e}", (out.f_best - opt.f_star).abs());

    // The active cut holds with equality at the solution.
    let (_, c) = problem.eval_raw(&out.x_best);
    println!("cut residual  : {:+.3e}", c[0]);
    println!("disk residual : {:+.3e}", c[1]);
}
