//! Surrogate internals: interpolation-set geometry and model quality. A
//! deliberately collinear set is diagnosed as badly poised, repaired with a
//! handful of extra evaluations, and the repaired model's error then decays
//! quadratically as the radius shrinks.

use nalgebra::DVector;
use nowpac::blackbox::EvalCounter;
use nowpac::surrogate::{
    build_mfn_model, ensure_fully_linear, is_fully_linear, poisedness, InterpolationSet,
};
use nowpac::BlackBoxProblem;

fn main() {
    let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2) + x[0] * x[1];
    let problem = BlackBoxProblem::new("diag", 2, 0, vec![0.0, 0.0], move |x| (f(x), vec![]));

    // Three points on a line cannot pin down a plane.
    let mut set = InterpolationSet::new(DVector::from_vec(vec![0.0, 0.0]), f(&[0.0, 0.0]), vec![]);
    for t in [0.5, 1.0] {
        let p = vec![t * 0.1, t * 0.1];
        set.insert(DVector::from_vec(p.clone()), f(&p), vec![]);
    }
    println!(
        "collinear set : poisedness = {:?}, fully linear = {}",
        poisedness(&set, 0.1).map(|l| format!("{l:.1}")),
        is_fully_linear(&set, 0.1)
    );

    let mut counter = EvalCounter::new();
    ensure_fully_linear(&mut set, &problem, &mut counter, 0.1).expect("repair failed");
    println!(
        "after repair  : poisedness = {:.2}, fully linear = {}, {} extra evaluations",
        poisedness(&set, 0.1).unwrap(),
        is_fully_linear(&set, 0.1),
        counter.count()
    );

    println!();
    println!("{:>8}  {:>12}  {:>12}", "radius", "worst error", "ratio");
    let mut last: Option<f64> = None;
    for k in 0..5 {
        let rho = 0.2 * 0.5f64.powi(k);
        let mut set =
            InterpolationSet::new(DVector::from_vec(vec![0.0, 0.0]), f(&[0.0, 0.0]), vec![]);
        let mut counter = EvalCounter::new();
        ensure_fully_linear(&mut set, &problem, &mut counter, rho).unwrap();
        let model = build_mfn_model(&set, rho).unwrap();
        let mut err = 0.0f64;
        for i in 0..64 {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            let s = DVector::from_vec(vec![rho * angle.cos(), rho * angle.sin()]);
            err = err.max((model.value(&s) - f(&[s[0], s[1]])).abs());
        }
        let ratio = last.map_or_else(|| "-".into(), |l: f64| format!("{:.2}", l / err));
        println!("{rho:>8.4}  {err:>12.3e}  {ratio:>12}");
        last = Some(err);
    }
    println!("(a ratio of ~4 per halving is the expected quadratic decay)");
}
