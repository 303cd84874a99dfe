//! Noisy evaluations and early termination: the same seeded noise stream is
//! solved twice, once with the noise indicator allowed to stop the run and
//! once forced to grind down to rho_min. The indicator saves the
//! evaluations that noise would have wasted.

use nowpac::bench::problems;
use nowpac::{optimize, NoisyProblem, SolverConfig};

fn main() {
    let delta_f = 1e-3;
    let seed = 7;

    let mut config = SolverConfig::default();
    config.rho_min = 1e-5;

    // Fresh wrapper per run: the noise stream is a pure function of
    // (seed, evaluation index), so both runs see identical values.
    let noisy = || NoisyProblem::new(problems::rosenbrock(), delta_f, 0.0, seed).into_problem();

    let early = optimize(&noisy(), &config).expect("solve failed");

    let mut grind_cfg = config.clone();
    grind_cfg.early_termination = false;
    let grind = optimize(&noisy(), &grind_cfg).expect("solve failed");

    let truth = problems::rosenbrock();
    let (f_early, _) = truth.eval_raw(&early.x_best);
    let (f_grind, _) = truth.eval_raw(&grind.x_best);

    println!("noise amplitude : {delta_f:.0e}");
    println!();
    println!("with early stop : {} evals, stopped by {}, true f = {f_early:.6e}",
        early.counter.count(), early.termination.as_str());
    println!("without         : {} evals, stopped by {}, true f = {f_grind:.6e}",
        grind.counter.count(), grind.termination.as_str());
    println!();
    println!(
        "saved {} evaluations for a true-objective gap of {:+.2e}",
        grind.counter.count() as i64 - early.counter.count() as i64,
        f_early - f_grind
    );
}
