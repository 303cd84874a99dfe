//! Config surface: every solver knob is settable by name with validated
//! ranges, the same mechanism the command line's `--set key=value` uses.
//! Out-of-range values are rejected with the permitted interval.

use nowpac::bench::problems;
use nowpac::{optimize, SolverConfig};

fn main() {
    let mut config = SolverConfig::default();
    for (key, value) in [
        ("rho_0", "0.5"),
        ("rho_min", "1e-6"),
        ("eta_0", "0.05"),
        ("gamma", "0.7"),
        ("max_evals", "500"),
    ] {
        config.set_field(key, value).expect("valid override");
    }

    println!("effective configuration:");
    for (name, value) in config.fields() {
        println!("  {name} = {value}");
    }

    match config.clone().set_field("gamma", "1.5") {
        Err(e) => println!("\nrejected gamma=1.5: {e}"),
        Ok(()) => unreachable!("gamma must stay below 1"),
    }

    let out = optimize(&problems::rosenbrock(), &config).expect("solve failed");
    println!(
        "\nsolved rosenbrock: {} evals, f_best = {:.3e}, terminated by {}",
        out.counter.count(),
        out.f_best,
        out.termination.as_str()
    );
}
