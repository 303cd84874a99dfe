//! Exact minimization of a quadratic over a Euclidean ball.
//!
//! Solves min gᵀs + ½ sᵀHs subject to ‖s‖ ≤ Δ by eigendecomposition of H and
//! a safeguarded root find on the secular equation ‖s(σ)‖ = Δ with
//! s(σ) = -(H + σI)⁻¹g. The hard case (gradient orthogonal to the eigenspace
//! of the smallest eigenvalue) is handled by moving along that eigenspace to
//! the boundary. Dimensions here are small (n ≤ a few dozen), so the dense
//! eigen-solve is the robust choice.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct BallMin {
    pub s: DVector<f64>,
    pub value: f64,
}

fn quad_value(g: &DVector<f64>, h: &DMatrix<f64>, s: &DVector<f64>) -> f64 {
    g.dot(s) + 0.5 * (h * s).dot(s)
}

/// Global minimizer of gᵀs + ½ sᵀHs over ‖s‖ ≤ delta. H must be symmetric.
pub fn minimize_quadratic_on_ball(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    delta: f64,
) -> BallMin {
    let n = g.len();
    if delta <= 0.0 {
        return BallMin {
            s: DVector::zeros(n),
            value: 0.0,
        };
    }
    let hnorm = h.amax();
    if hnorm == 0.0 {
        // Linear objective: step to the boundary against the gradient.
        let gnorm = g.norm();
        if gnorm == 0.0 {
            return BallMin {
                s: DVector::zeros(n),
                value: 0.0,
            };
        }
        let s = g * (-delta / gnorm);
        return BallMin {
            value: -delta * gnorm,
            s,
        };
    }

    let eig = h.clone().symmetric_eigen();
    let lam = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gbar = q.transpose() * g;
    let lam_min = lam.min();

    // Interior candidate: valid when H is positive semidefinite and the
    // Newton point fits inside the ball.
    if lam_min >= 0.0 {
        let tiny = 1e-14 * hnorm.max(1.0);
        let mut interior_ok = true;
        let mut sbar = DVector::zeros(n);
        for i in 0..n {
            if lam[i] > tiny {
                sbar[i] = -gbar[i] / lam[i];
            } else if gbar[i].abs() > 1e-12 * g.norm().max(1.0) {
                interior_ok = false; // unbounded direction inside the null space
                break;
            }
        }
        if interior_ok && sbar.norm() <= delta {
            let s = q * sbar;
            let value = quad_value(g, h, &s);
            return BallMin { s, value };
        }
    }

    // Boundary solution: s(σ) = -(H+σI)⁻¹ g with σ ≥ max(0, -λ_min) chosen so
    // that ‖s(σ)‖ = Δ. φ(σ) = ‖s(σ)‖ is strictly decreasing on that interval.
    let sigma_lo = (-lam_min).max(0.0);
    let phi = |sigma: f64| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            let d = lam[i] + sigma;
            if d.abs() < 1e-300 {
                return f64::INFINITY;
            }
            sum += (gbar[i] / d).powi(2);
        }
        sum.sqrt()
    };

    // Norm of the component of s(σ_lo) orthogonal to the minimal eigenspace.
    let gap = 1e-10 * (hnorm + 1.0);
    let mut perp_sq = 0.0;
    let mut grad_in_min_space = 0.0_f64;
    for i in 0..n {
        let d = lam[i] + sigma_lo;
        if d > gap {
            perp_sq += (gbar[i] / d).powi(2);
        } else {
            grad_in_min_space = grad_in_min_space.max(gbar[i].abs());
        }
    }
    let hard_case = grad_in_min_space <= 1e-11 * g.norm().max(1.0) && perp_sq.sqrt() <= delta;

    if hard_case {
        // σ is pinned at -λ_min; fill the remaining radius along a minimal
        // eigenvector.
        let mut sbar = DVector::zeros(n);
        for i in 0..n {
            let d = lam[i] + sigma_lo;
            if d > gap {
                sbar[i] = -gbar[i] / d;
            }
        }
        let t = (delta * delta - perp_sq).max(0.0).sqrt();
        let idx = (0..n)
            .min_by(|&a, &b| lam[a].partial_cmp(&lam[b]).unwrap())
            .unwrap();
        sbar[idx] += t;
        let s = q * sbar;
        let value = quad_value(g, h, &s);
        return BallMin { s, value };
    }

    // Regular case: bisect on σ. φ(σ_lo⁺) > Δ, and φ(σ_hi) < Δ for σ_hi large.
    let mut lo = sigma_lo;
    let mut hi = sigma_lo + g.norm() / delta + hnorm + 1.0;
    while phi(hi) > delta {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let sigma = hi;
    let mut sbar = DVector::zeros(n);
    for i in 0..n {
        let d = lam[i] + sigma;
        sbar[i] = if d.abs() < 1e-300 { 0.0 } else { -gbar[i] / d };
    }
    // Rescale exactly onto the boundary to absorb bisection residue.
    let nrm = sbar.norm();
    if nrm > 0.0 {
        sbar *= delta / nrm;
    }
    let s = q * sbar;
    let value = quad_value(g, h, &s);
    BallMin { s, value }
}

/// Maximum of |c0 + gᵀs + ½ sᵀHs| over ‖s‖ ≤ delta, with a maximizer.
pub fn max_abs_quadratic_on_ball(
    c0: f64,
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    delta: f64,
) -> (f64, DVector<f64>) {
    let lo = minimize_quadratic_on_ball(g, h, delta);
    let neg_h = -h.clone();
    let neg_g = -g.clone();
    let hi = minimize_quadratic_on_ball(&neg_g, &neg_h, delta);
    // max q = c0 - min(-q); min q = c0 + lo.value
    let q_max = c0 - hi.value;
    let q_min = c0 + lo.value;
    if q_max.abs() >= q_min.abs() {
        (q_max.abs(), hi.s)
    } else {
        (q_min.abs(), lo.s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
        (&a + a.transpose()) * 0.5
    }

    /// Dense-sampling lower bound on the ball minimum: random interior points
    /// plus boundary points. The exact solver must do at least this well.
    fn sampled_min(
        g: &DVector<f64>,
        h: &DMatrix<f64>,
        delta: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let n = g.len();
        let mut best = 0.0_f64; // s = 0
        for _ in 0..60_000 {
            let mut d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let nrm = d.norm();
            if nrm == 0.0 {
                continue;
            }
            let r: f64 = rng.random_range(0.0..1.0_f64);
            d *= delta * r.powf(1.0 / n as f64) / nrm;
            best = best.min(quad_value(g, h, &d));
            let db = d.clone() * (delta / d.norm());
            best = best.min(quad_value(g, h, &db));
        }
        best
    }

    #[test]
    fn interior_newton_point() {
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let h = DMatrix::identity(2, 2);
        let out = minimize_quadratic_on_ball(&g, &h, 2.0);
        assert!((out.s[0] + 1.0).abs() < 1e-12);
        assert!(out.s[1].abs() < 1e-12);
        assert!((out.value + 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_objective_steps_to_boundary() {
        let g = DVector::from_vec(vec![3.0, 4.0]);
        let h = DMatrix::zeros(2, 2);
        let out = minimize_quadratic_on_ball(&g, &h, 0.5);
        assert!((out.value + 2.5).abs() < 1e-12);
        assert!((out.s.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_negative_curvature_fills_radius() {
        let g = DVector::zeros(2);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0]));
        let out = minimize_quadratic_on_ball(&g, &h, 1.5);
        assert!((out.s.norm() - 1.5).abs() < 1e-10);
        assert!((out.value - 0.5 * (-2.0) * 1.5 * 1.5).abs() < 1e-10);
    }

    #[test]
    fn hard_case_matches_analytic_value() {
        // H = diag(-2, 1), g = (0, 1): gradient orthogonal to the negative
        // eigenspace. σ = 2, s_perp = (0, -1/3), boundary filled along e1.
        let g = DVector::from_vec(vec![0.0, 1.0]);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0]));
        let delta = 1.0;
        let out = minimize_quadratic_on_ball(&g, &h, delta);
        assert!((out.s.norm() - 1.0).abs() < 1e-10);
        let t = (1.0_f64 - 1.0 / 9.0).sqrt();
        let expected = -1.0 / 3.0 + 0.5 * (-2.0 * t * t + (1.0 / 9.0));
        assert!(
            (out.value - expected).abs() < 1e-10,
            "value {} vs expected {}",
            out.value,
            expected
        );
    }

    #[test]
    fn beats_dense_sampling_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..40 {
            let n = if trial % 2 == 0 { 2 } else { 5 };
            let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let h = random_symmetric(&mut rng, n, 3.0);
            let delta = rng.random_range(0.1..2.0);
            let out = minimize_quadratic_on_ball(&g, &h, delta);
            assert!(out.s.norm() <= delta * (1.0 + 1e-12));
            assert!((out.value - quad_value(&g, &h, &out.s)).abs() < 1e-9);
            let sampled = sampled_min(&g, &h, delta, &mut rng);
            assert!(
                out.value <= sampled + 1e-7,
                "trial {trial}: exact {} worse than sampled {}",
                out.value,
                sampled
            );
        }
    }

    #[test]
    fn abs_max_picks_larger_sign() {
        // q(s) = 1 + s1 on the unit ball: max |q| = 2 at s = (1, 0).
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let h = DMatrix::zeros(2, 2);
        let (m, at) = max_abs_quadratic_on_ball(1.0, &g, &h, 1.0);
        assert!((m - 2.0).abs() < 1e-12);
        assert!((at[0] - 1.0).abs() < 1e-10);
    }
}
