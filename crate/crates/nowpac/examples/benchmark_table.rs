//! The benchmark harness end to end: every catalogue problem at one
//! stopping threshold, rendered as a markdown table, then a noise sweep on
//! Rosenbrock with the evaluation-savings column.

use nowpac::bench::{emit_table, noise_sweep, problems, run_benchmark, standard_cases, TableFormat};
use nowpac::SolverConfig;

fn main() {
    let config = SolverConfig::default();

    let mut rows = Vec::new();
    for case in standard_cases(1e-3) {
        rows.extend(run_benchmark(&case, &config).expect("benchmark failed"));
    }
    println!("{}", emit_table(&rows, TableFormat::Markdown).unwrap());

    let mut sweep_cfg = config.clone();
    sweep_cfg.rho_min = 1e-5;
    let sweep = noise_sweep(
        &problems::rosenbrock(),
        &[1e-2, 1e-3, 1e-4],
        20,
        &sweep_cfg,
    )
    .expect("sweep failed");
    let sweep_rows: Vec<_> = sweep.into_iter().map(|(_, row)| row).collect();
    println!("{}", emit_table(&sweep_rows, TableFormat::Markdown).unwrap());
}
