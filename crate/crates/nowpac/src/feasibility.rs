//! Inner boundary path: the offset added to constraint surrogates so that
//! trial steps stay strictly inside the true feasible region.
//!
//! The offset is h(d) = eps_b · ‖d‖^(2/(1+p)) for a path exponent p ∈ [0, 1).
//! At p = 0 (the operating default) it is the quadratic eps_b·‖d‖², which
//! convexifies the model constraint m_i(d) + h(d) whenever eps_b is at least
//! half the largest constraint-model curvature. The scale eps_b is adapted
//! each iteration from the last step-to-radius ratio so the offset loosens
//! when steps get clipped by it.

use nalgebra::{DMatrix, DVector};

use crate::surrogate::QuadraticModel;

/// Lower clamp on the adapted scale, as a fraction of the base eps_b.
pub const EPS_B_MIN_FACTOR: f64 = 1e-3;
/// Upper bound on escalation, as a multiple of the base eps_b.
pub const EPS_B_MAX_FACTOR: f64 = 1e3;

/// h(d) = eps_b ‖d‖^(2/(1+p)).
pub fn ibp_value(d: &DVector<f64>, eps_b: f64, p: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&p));
    let nrm = d.norm();
    if nrm == 0.0 {
        return 0.0;
    }
    eps_b * nrm.powf(2.0 / (1.0 + p))
}

/// ∇h(d); zero at d = 0 since the exponent 2/(1+p) exceeds 1.
pub fn ibp_gradient(d: &DVector<f64>, eps_b: f64, p: f64) -> DVector<f64> {
    let nrm = d.norm();
    if nrm == 0.0 {
        return DVector::zeros(d.len());
    }
    let beta = 2.0 / (1.0 + p);
    d * (eps_b * beta * nrm.powf(beta - 2.0))
}

/// ∇²h(d) where it exists. At p = 0 this is 2·eps_b·I everywhere; for p > 0
/// the Hessian blows up at d = 0, so None is returned there and callers fall
/// back to gradient steps.
pub fn ibp_hessian(d: &DVector<f64>, eps_b: f64, p: f64) -> Option<DMatrix<f64>> {
    let n = d.len();
    if p == 0.0 {
        return Some(DMatrix::identity(n, n) * (2.0 * eps_b));
    }
    let nrm = d.norm();
    if nrm == 0.0 {
        return None;
    }
    let beta = 2.0 / (1.0 + p);
    let unit = d / nrm;
    let eye = DMatrix::identity(n, n);
    Some((eye + &unit * unit.transpose() * (beta - 2.0)) * (eps_b * beta * nrm.powf(beta - 2.0)))
}

/// Per-iteration rescaling: eps_b,k = eps_b · (‖s‖/ρ)², clamped to
/// [EPS_B_MIN_FACTOR, EPS_B_MAX_FACTOR] times the base. A full-radius step
/// keeps the base scale; clipped steps relax the offset quadratically.
pub fn adapt_eps_b(eps_b_base: f64, step_norm: f64, rho: f64) -> f64 {
    debug_assert!(eps_b_base > 0.0 && rho > 0.0);
    let ratio = step_norm / rho;
    let raw = eps_b_base * ratio * ratio;
    raw.clamp(EPS_B_MIN_FACTOR * eps_b_base, EPS_B_MAX_FACTOR * eps_b_base)
}

/// Offset constraint values m_i(d) + h(d) for every constraint model.
pub fn model_constraint_values(
    models: &[QuadraticModel],
    d: &DVector<f64>,
    eps_b: f64,
    p: f64,
) -> Vec<f64> {
    let h = ibp_value(d, eps_b, p);
    models.iter().map(|m| m.value(d) + h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_matches_hand_computation() {
        // eps_b = 10, p = 0, d = (0.5, 0): 10 · 0.25 = 2.5
        let d = DVector::from_vec(vec![0.5, 0.0]);
        assert!((ibp_value(&d, 10.0, 0.0) - 2.5).abs() < 1e-15);
        // p = 0.2, ‖d‖ = 1: 10 · 1^(2/1.2) = 10
        let d1 = DVector::from_vec(vec![1.0, 0.0]);
        assert!((ibp_value(&d1, 10.0, 0.2) - 10.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_hand_computation() {
        // p = 0: ∇h = 2 eps_b d
        let d = DVector::from_vec(vec![0.5, 0.0]);
        let g = ibp_gradient(&d, 10.0, 0.0);
        assert!((g[0] - 10.0).abs() < 1e-15);
        assert!(g[1].abs() < 1e-15);
        assert_eq!(ibp_gradient(&DVector::zeros(2), 10.0, 0.3), DVector::zeros(2));
    }

    #[test]
    fn gradient_matches_central_differences() {
        for &p in &[0.0, 0.2, 0.5, 0.9] {
            let d = DVector::from_vec(vec![0.3, -0.2, 0.1]);
            let g = ibp_gradient(&d, 7.0, p);
            let eps = 1e-6;
            for k in 0..3 {
                let mut dp = d.clone();
                let mut dm = d.clone();
                dp[k] += eps;
                dm[k] -= eps;
                let fd = (ibp_value(&dp, 7.0, p) - ibp_value(&dm, 7.0, p)) / (2.0 * eps);
                assert!(
                    (g[k] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                    "p={p} k={k}: {} vs {}",
                    g[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        for &p in &[0.0, 0.4] {
            let d = DVector::from_vec(vec![0.3, -0.2]);
            let h = ibp_hessian(&d, 5.0, p).unwrap();
            let eps = 1e-6;
            for k in 0..2 {
                let mut dp = d.clone();
                let mut dm = d.clone();
                dp[k] += eps;
                dm[k] -= eps;
                let col = (ibp_gradient(&dp, 5.0, p) - ibp_gradient(&dm, 5.0, p)) / (2.0 * eps);
                for j in 0..2 {
                    assert!((h[(j, k)] - col[j]).abs() < 1e-5 * (1.0 + col[j].abs()));
                }
            }
        }
        assert!(ibp_hessian(&DVector::zeros(2), 5.0, 0.4).is_none());
        assert!(ibp_hessian(&DVector::zeros(2), 5.0, 0.0).is_some());
    }

    #[test]
    fn adaptation_follows_step_ratio() {
        // eps_b = 10, ‖s‖/ρ = 1/2: 10 · 0.25 = 2.5
        assert!((adapt_eps_b(10.0, 0.05, 0.1) - 2.5).abs() < 1e-15);
        // Tiny ratio clamps at the floor 1e-3 · eps_b = 1e-2.
        assert!((adapt_eps_b(10.0, 1e-3, 0.1) - 1e-2).abs() < 1e-15);
        // Full-radius step keeps the base scale.
        assert!((adapt_eps_b(10.0, 0.1, 0.1) - 10.0).abs() < 1e-15);
    }

    #[test]
    fn offset_constraints_match_hand_values() {
        // m(s) = s1, eps_b = 10, p = 0.
        let m = QuadraticModel::new(
            DVector::zeros(2),
            0.0,
            DVector::from_vec(vec![1.0, 0.0]),
            DMatrix::zeros(2, 2),
        );
        let v1 = model_constraint_values(&[m.clone()], &DVector::from_vec(vec![-0.5, 0.0]), 10.0, 0.0);
        assert!((v1[0] - 2.0).abs() < 1e-15);
        let v2 = model_constraint_values(&[m], &DVector::from_vec(vec![-0.05, 0.0]), 10.0, 0.0);
        assert!((v2[0] + 0.025).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn offset_is_positive_away_from_origin(
            x in -2.0..2.0f64,
            y in -2.0..2.0f64,
            eps in 0.01..50.0f64,
            p in 0.0..0.99f64,
        ) {
            let d = DVector::from_vec(vec![x, y]);
            let v = ibp_value(&d, eps, p);
            if d.norm() > 0.0 {
                prop_assert!(v > 0.0);
            } else {
                prop_assert_eq!(v, 0.0);
            }
            // Larger eps tightens the offset set monotonically.
            prop_assert!(ibp_value(&d, eps * 2.0, p) >= v);
        }
    }
}
