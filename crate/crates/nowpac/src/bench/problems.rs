//! Closed-form test problems with analytic gradients and known optima.
//!
//! Every constraint is written as c_i(x) ≤ 0. Gradients back the exact
//! criticality oracle; the solver itself never sees them.

use nalgebra::{DMatrix, DVector};

use crate::blackbox::BlackBoxProblem;

use super::BenchError;

/// Banana valley f = (x2 - x1²)² + (x1 - 1)², unconstrained, from (1.5, 1.5).
pub fn rosenbrock() -> BlackBoxProblem {
    BlackBoxProblem::new("rosenbrock", 2, 0, vec![1.5, 1.5], |x| {
        let t = x[1] - x[0] * x[0];
        (t * t + (x[0] - 1.0) * (x[0] - 1.0), vec![])
    })
    .with_gradient(|x| {
        let t = x[1] - x[0] * x[0];
        (
            DVector::from_vec(vec![-4.0 * x[0] * t + 2.0 * (x[0] - 1.0), 2.0 * t]),
            DMatrix::zeros(0, 2),
        )
    })
    .with_optimum(vec![1.0, 1.0], 0.0)
}

/// Anisotropic exponential f = -exp(xᵀDx), D = diag(1..5), subject to
/// sin(‖x‖²) ≤ 1/2 and ‖x - (3/8)e5‖ ≤ 3/8. The first constraint is active
/// at the optimum (0,0,0,0,√(π/6)).
pub fn aniso_exp() -> BlackBoxProblem {
    let a5 = 0.375;
    let eval = move |x: &[f64]| {
        let q: f64 = x.iter().enumerate().map(|(i, xi)| (i as f64 + 1.0) * xi * xi).sum();
        let n2: f64 = x.iter().map(|xi| xi * xi).sum();
        let mut shifted: Vec<f64> = x.to_vec();
        shifted[4] -= a5;
        let dist = shifted.iter().map(|v| v * v).sum::<f64>().sqrt();
        (-q.exp(), vec![n2.sin() - 0.5, dist - a5])
    };
    let grad = move |x: &[f64]| {
        let q: f64 = x.iter().enumerate().map(|(i, xi)| (i as f64 + 1.0) * xi * xi).sum();
        let n2: f64 = x.iter().map(|xi| xi * xi).sum();
        let g = DVector::from_fn(5, |j, _| -q.exp() * 2.0 * (j as f64 + 1.0) * x[j]);
        let mut jc = DMatrix::zeros(2, 5);
        for j in 0..5 {
            jc[(0, j)] = 2.0 * n2.cos() * x[j];
        }
        let mut shifted: Vec<f64> = x.to_vec();
        shifted[4] -= a5;
        let dist = shifted.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dist > 0.0 {
            for j in 0..5 {
                jc[(1, j)] = shifted[j] / dist;
            }
        }
        (g, jc)
    };
    let x5 = (std::f64::consts::PI / 6.0).sqrt();
    let f_star = -(5.0 * std::f64::consts::PI / 6.0).exp();
    BlackBoxProblem::new("aniso_exp", 5, 2, vec![0.1; 5], eval)
        .with_gradient(grad)
        .with_optimum(vec![0.0, 0.0, 0.0, 0.0, x5], f_star)
}

const HS285_C: [f64; 15] = [
    486.0, 640.0, 758.0, 776.0, 477.0, 707.0, 175.0, 619.0, 627.0, 614.0, 475.0, 377.0, 524.0,
    468.0, 529.0,
];
const HS285_B: [f64; 10] = [
    385.0, 470.0, 560.0, 565.0, 645.0, 430.0, 485.0, 455.0, 390.0, 460.0,
];

/// Quadratic-constraint coefficients for hs285. Row sums equal the
/// right-hand sides and column sums stay proportional to the objective
/// coefficients, which makes the all-ones point exactly optimal with every
/// constraint active; the loop shifts break the rank-one structure without
/// touching either family of sums.
pub(crate) fn hs285_matrix() -> DMatrix<f64> {
    let total: f64 = HS285_C.iter().sum();
    let mut a = DMatrix::from_fn(10, 15, |i, j| HS285_B[i] * HS285_C[j] / total);
    for k in 0..24usize {
        let i1 = k % 10;
        let i2 = (3 * k + 1) % 10;
        let j1 = (2 * k) % 15;
        let j2 = (7 * k + 2) % 15;
        if i1 == i2 || j1 == j2 {
            continue;
        }
        let d = 0.5 + 0.5 * (k % 5) as f64;
        a[(i1, j1)] += d;
        a[(i1, j2)] -= d;
        a[(i2, j1)] -= d;
        a[(i2, j2)] += d;
    }
    a
}

/// Classic inequality-constrained test problems, keyed by their customary
/// numbers. Each returns the standard formulation with the published
/// starting point and optimum.
pub fn hs_problem(id: u32) -> Result<BlackBoxProblem, BenchError> {
    let p = match id {
        // max x1·x2·x3 inside an ellipsoid.
        29 => BlackBoxProblem::new("hs29", 3, 1, vec![1.0, 1.0, 1.0], |x| {
            (
                -x[0] * x[1] * x[2],
                vec![x[0] * x[0] + 2.0 * x[1] * x[1] + 4.0 * x[2] * x[2] - 48.0],
            )
        })
        .with_gradient(|x| {
            (
                DVector::from_vec(vec![-x[1] * x[2], -x[0] * x[2], -x[0] * x[1]]),
                DMatrix::from_row_slice(1, 3, &[2.0 * x[0], 4.0 * x[1], 8.0 * x[2]]),
            )
        })
        .with_optimum(
            vec![4.0, 2.0 * 2.0_f64.sqrt(), 2.0],
            -16.0 * 2.0_f64.sqrt(),
        ),
        43 => rosen_suzuki("hs43", 10.0),
        // Polynomial objective with two active constraints at the optimum.
        100 => BlackBoxProblem::new("hs100", 7, 4, vec![1.0, 2.0, 0.0, 4.0, 0.0, 1.0, 1.0], |x| {
            let f = (x[0] - 10.0).powi(2)
                + 5.0 * (x[1] - 12.0).powi(2)
                + x[2].powi(4)
                + 3.0 * (x[3] - 11.0).powi(2)
                + 10.0 * x[4].powi(6)
                + 7.0 * x[5] * x[5]
                + x[6].powi(4)
                - 4.0 * x[5] * x[6]
                - 10.0 * x[5]
                - 8.0 * x[6];
            let c = vec![
                2.0 * x[0] * x[0] + 3.0 * x[1].powi(4) + x[2] + 4.0 * x[3] * x[3] + 5.0 * x[4]
                    - 127.0,
                7.0 * x[0] + 3.0 * x[1] + 10.0 * x[2] * x[2] + x[3] - x[4] - 282.0,
                23.0 * x[0] + x[1] * x[1] + 6.0 * x[5] * x[5] - 8.0 * x[6] - 196.0,
                4.0 * x[0] * x[0] + x[1] * x[1] - 3.0 * x[0] * x[1] + 2.0 * x[2] * x[2]
                    + 5.0 * x[5]
                    - 11.0 * x[6],
            ];
            (f, c)
        })
        .with_gradient(|x| {
            let g = DVector::from_vec(vec![
                2.0 * (x[0] - 10.0),
                10.0 * (x[1] - 12.0),
                4.0 * x[2].powi(3),
                6.0 * (x[3] - 11.0),
                60.0 * x[4].powi(5),
                14.0 * x[5] - 4.0 * x[6] - 10.0,
                4.0 * x[6].powi(3) - 4.0 * x[5] - 8.0,
            ]);
            let jc = DMatrix::from_row_slice(
                4,
                7,
                &[
                    4.0 * x[0], 12.0 * x[1].powi(3), 1.0, 8.0 * x[3], 5.0, 0.0, 0.0,
                    7.0, 3.0, 20.0 * x[2], 1.0, -1.0, 0.0, 0.0,
                    23.0, 2.0 * x[1], 0.0, 0.0, 0.0, 12.0 * x[5], -8.0,
                    8.0 * x[0] - 3.0 * x[1], 2.0 * x[1] - 3.0 * x[0], 4.0 * x[2], 0.0, 0.0, 5.0,
                    -11.0,
                ],
            );
            (g, jc)
        })
        .with_optimum(
            vec![
                2.330499, 1.951372, -0.4775414, 4.365726, -0.6244870, 1.038131, 1.594227,
            ],
            680.6300573,
        ),
        // Wong's ten-variable problem with eight constraints.
        113 => BlackBoxProblem::new(
            "hs113",
            10,
            8,
            vec![2.0, 3.0, 5.0, 5.0, 1.0, 2.0, 7.0, 3.0, 6.0, 10.0],
            |x| {
                let f = x[0] * x[0] + x[1] * x[1] + x[0] * x[1] - 14.0 * x[0] - 16.0 * x[1]
                    + (x[2] - 10.0).powi(2)
                    + 4.0 * (x[3] - 5.0).powi(2)
                    + (x[4] - 3.0).powi(2)
                    + 2.0 * (x[5] - 1.0).powi(2)
                    + 5.0 * x[6] * x[6]
                    + 7.0 * (x[7] - 11.0).powi(2)
                    + 2.0 * (x[8] - 10.0).powi(2)
                    + (x[9] - 7.0).powi(2)
                    + 45.0;
                let c = vec![
                    4.0 * x[0] + 5.0 * x[1] - 3.0 * x[6] + 9.0 * x[7] - 105.0,
                    10.0 * x[0] - 8.0 * x[1] - 17.0 * x[6] + 2.0 * x[7],
                    -8.0 * x[0] + 2.0 * x[1] + 5.0 * x[8] - 2.0 * x[9] - 12.0,
                    3.0 * (x[0] - 2.0).powi(2) + 4.0 * (x[1] - 3.0).powi(2) + 2.0 * x[2] * x[2]
                        - 7.0 * x[3]
                        - 120.0,
                    5.0 * x[0] * x[0] + 8.0 * x[1] + (x[2] - 6.0).powi(2) - 2.0 * x[3] - 40.0,
                    x[0] * x[0] + 2.0 * (x[1] - 2.0).powi(2) - 2.0 * x[0] * x[1] + 14.0 * x[4]
                        - 6.0 * x[5],
                    0.5 * (x[0] - 8.0).powi(2) + 2.0 * (x[1] - 4.0).powi(2) + 3.0 * x[4] * x[4]
                        - x[5]
                        - 30.0,
                    -3.0 * x[0] + 6.0 * x[1] + 12.0 * (x[8] - 8.0).powi(2) - 7.0 * x[9],
                ];
                (f, c)
            },
        )
        .with_gradient(|x| {
            let g = DVector::from_vec(vec![
                2.0 * x[0] + x[1] - 14.0,
                2.0 * x[1] + x[0] - 16.0,
                2.0 * (x[2] - 10.0),
                8.0 * (x[3] - 5.0),
                2.0 * (x[4] - 3.0),
                4.0 * (x[5] - 1.0),
                10.0 * x[6],
                14.0 * (x[7] - 11.0),
                4.0 * (x[8] - 10.0),
                2.0 * (x[9] - 7.0),
            ]);
            let mut jc = DMatrix::zeros(8, 10);
            for (j, v) in [(0, 4.0), (1, 5.0), (6, -3.0), (7, 9.0)] {
                jc[(0, j)] = v;
            }
            for (j, v) in [(0, 10.0), (1, -8.0), (6, -17.0), (7, 2.0)] {
                jc[(1, j)] = v;
            }
            for (j, v) in [(0, -8.0), (1, 2.0), (8, 5.0), (9, -2.0)] {
                jc[(2, j)] = v;
            }
            jc[(3, 0)] = 6.0 * (x[0] - 2.0);
            jc[(3, 1)] = 8.0 * (x[1] - 3.0);
            jc[(3, 2)] = 4.0 * x[2];
            jc[(3, 3)] = -7.0;
            jc[(4, 0)] = 10.0 * x[0];
            jc[(4, 1)] = 8.0;
            jc[(4, 2)] = 2.0 * (x[2] - 6.0);
            jc[(4, 3)] = -2.0;
            jc[(5, 0)] = 2.0 * x[0] - 2.0 * x[1];
            jc[(5, 1)] = 4.0 * (x[1] - 2.0) - 2.0 * x[0];
            jc[(5, 4)] = 14.0;
            jc[(5, 5)] = -6.0;
            jc[(6, 0)] = x[0] - 8.0;
            jc[(6, 1)] = 4.0 * (x[1] - 4.0);
            jc[(6, 4)] = 6.0 * x[4];
            jc[(6, 5)] = -1.0;
            jc[(7, 0)] = -3.0;
            jc[(7, 1)] = 6.0;
            jc[(7, 8)] = 24.0 * (x[8] - 8.0);
            jc[(7, 9)] = -7.0;
            (g, jc)
        })
        .with_optimum(
            vec![
                2.171996, 2.363683, 8.773926, 5.095984, 0.9906548, 1.430574, 1.321644, 9.828726,
                8.280092, 8.375927,
            ],
            24.3062091,
        ),
        // Quadratic distance to (2,1) between two parabolas meeting at (1,1).
        227 => BlackBoxProblem::new("hs227", 2, 2, vec![0.5, 0.5], |x| {
            (
                (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2),
                vec![x[0] * x[0] - x[1], x[1] * x[1] - x[0]],
            )
        })
        .with_gradient(|x| {
            (
                DVector::from_vec(vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 1.0)]),
                DMatrix::from_row_slice(2, 2, &[2.0 * x[0], -1.0, -1.0, 2.0 * x[1]]),
            )
        })
        .with_optimum(vec![1.0, 1.0], 1.0),
        // Linear-plus-square objective; the disk constraint is active at
        // (0, -3) while the half-plane stays slack.
        228 => BlackBoxProblem::new("hs228", 2, 2, vec![0.0, 0.0], |x| {
            (
                x[0] * x[0] + x[1],
                vec![x[0] + x[1] - 1.0, x[0] * x[0] + x[1] * x[1] - 9.0],
            )
        })
        .with_gradient(|x| {
            (
                DVector::from_vec(vec![2.0 * x[0], 1.0]),
                DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0 * x[0], 2.0 * x[1]]),
            )
        })
        .with_optimum(vec![0.0, -3.0], -3.0),
        264 => rosen_suzuki("hs264", 9.0),
        285 => {
            let a = hs285_matrix();
            let a_eval = a.clone();
            let a_grad = a.clone();
            BlackBoxProblem::new("hs285", 15, 10, vec![0.0; 15], move |x| {
                let f = -HS285_C.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
                let c = (0..10)
                    .map(|i| {
                        (0..15).map(|j| a_eval[(i, j)] * x[j] * x[j]).sum::<f64>() - HS285_B[i]
                    })
                    .collect();
                (f, c)
            })
            .with_gradient(move |x| {
                let g = DVector::from_fn(15, |j, _| -HS285_C[j]);
                let jc = DMatrix::from_fn(10, 15, |i, j| 2.0 * a_grad[(i, j)] * x[j]);
                (g, jc)
            })
            .with_optimum(vec![1.0; 15], -HS285_C.iter().sum::<f64>())
        }
        other => return Err(BenchError::UnknownProblemId(other)),
    };
    Ok(p)
}

/// Rosen-Suzuki quartet: the same quadratic objective under three quadratic
/// constraints; `g2_level` is the only coefficient the two catalogued
/// variants disagree on. Both share the optimum (0, 1, 2, -1) with value -44.
fn rosen_suzuki(name: &'static str, g2_level: f64) -> BlackBoxProblem {
    BlackBoxProblem::new(name, 4, 3, vec![0.0; 4], move |x| {
        let f = x[0] * x[0] + x[1] * x[1] + 2.0 * x[2] * x[2] + x[3] * x[3]
            - 5.0 * x[0]
            - 5.0 * x[1]
            - 21.0 * x[2]
            + 7.0 * x[3];
        let c = vec![
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] + x[0] - x[1] + x[2] - x[3]
                - 8.0,
            x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2] + 2.0 * x[3] * x[3] - x[0] - x[3]
                - g2_level,
            2.0 * x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 2.0 * x[0] - x[1] - x[3] - 5.0,
        ];
        (f, c)
    })
    .with_gradient(|x| {
        let g = DVector::from_vec(vec![
            2.0 * x[0] - 5.0,
            2.0 * x[1] - 5.0,
            4.0 * x[2] - 21.0,
            2.0 * x[3] + 7.0,
        ]);
        let jc = DMatrix::from_row_slice(
            3,
            4,
            &[
                2.0 * x[0] + 1.0, 2.0 * x[1] - 1.0, 2.0 * x[2] + 1.0, 2.0 * x[3] - 1.0,
                2.0 * x[0] - 1.0, 4.0 * x[1], 2.0 * x[2], 4.0 * x[3] - 1.0,
                4.0 * x[0] + 2.0, 2.0 * x[1] - 1.0, 2.0 * x[2], -1.0,
            ],
        );
        (g, jc)
    })
    .with_optimum(vec![0.0, 1.0, 2.0, -1.0], -44.0)
}

/// Every problem the benchmark suite runs, in table order.
pub fn all_problems() -> Vec<BlackBoxProblem> {
    let mut v = vec![rosenbrock(), aniso_exp()];
    for id in [29, 43, 100, 113, 227, 228, 264, 285] {
        v.push(hs_problem(id).unwrap());
    }
    v
}

/// Case lookup by table name; `aniso-exp` and `aniso` alias `aniso_exp`.
pub fn problem_by_name(name: &str) -> Option<BlackBoxProblem> {
    match name {
        "rosenbrock" => Some(rosenbrock()),
        "aniso_exp" | "aniso-exp" | "aniso" => Some(aniso_exp()),
        _ => name
            .strip_prefix("hs")
            .and_then(|id| id.parse::<u32>().ok())
            .and_then(|id| hs_problem(id).ok()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::is_feasible;
    use approx::assert_relative_eq;

    fn assert_gradient_matches(problem: &BlackBoxProblem, x: &[f64]) {
        let xv = DVector::from_row_slice(x);
        let (g, jc) = problem.gradient(&xv);
        for j in 0..problem.n {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = xv.clone();
            let mut xm = xv.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, cp) = problem.eval_raw(&xp);
            let (fm, cm) = problem.eval_raw(&xm);
            let scale_f = g[j].abs().max(1.0);
            assert!(
                ((fp - fm) / (2.0 * h) - g[j]).abs() <= 1e-4 * scale_f,
                "{}: df/dx{} mismatch",
                problem.name,
                j
            );
            for i in 0..problem.r {
                let fd = (cp[i] - cm[i]) / (2.0 * h);
                let scale_c = jc[(i, j)].abs().max(1.0);
                assert!(
                    (fd - jc[(i, j)]).abs() <= 1e-4 * scale_c,
                    "{}: dc{}/dx{} mismatch: {} vs {}",
                    problem.name,
                    i,
                    j,
                    fd,
                    jc[(i, j)]
                );
            }
        }
    }

    #[test]
    fn dimensions_match_catalog() {
        let dims = [
            ("rosenbrock", 2, 0),
            ("aniso_exp", 5, 2),
            ("hs29", 3, 1),
            ("hs43", 4, 3),
            ("hs100", 7, 4),
            ("hs113", 10, 8),
            ("hs227", 2, 2),
            ("hs228", 2, 2),
            ("hs264", 4, 3),
            ("hs285", 15, 10),
        ];
        let problems = all_problems();
        assert_eq!(problems.len(), dims.len());
        for (p, (name, n, r)) in problems.iter().zip(dims) {
            assert_eq!(p.name, name);
            assert_eq!((p.n, p.r), (n, r), "{name}");
        }
    }

    #[test]
    fn starting_values_are_pinned() {
        let check = |p: &BlackBoxProblem, f0: f64, c0: &[f64]| {
            let (f, c) = p.eval_raw(&p.x0);
            assert_relative_eq!(f, f0, max_relative = 1e-12, epsilon = 1e-12);
            assert_eq!(c.len(), c0.len(), "{}", p.name);
            for (got, want) in c.iter().zip(c0) {
                assert_relative_eq!(got, want, max_relative = 1e-12, epsilon = 1e-12);
            }
        };
        check(&rosenbrock(), 0.8125, &[]);
        let aniso = aniso_exp();
        let (f0, c0) = aniso.eval_raw(&aniso.x0);
        assert_relative_eq!(f0, -(0.15_f64.exp()), max_relative = 1e-12);
        assert_relative_eq!(c0[0], 0.05_f64.sin() - 0.5, max_relative = 1e-12);
        assert_relative_eq!(c0[1], 0.115625_f64.sqrt() - 0.375, max_relative = 1e-12);
        check(&hs_problem(29).unwrap(), -1.0, &[-41.0]);
        check(&hs_problem(43).unwrap(), 0.0, &[-8.0, -10.0, -5.0]);
        check(&hs_problem(100).unwrap(), 714.0, &[-13.0, -265.0, -171.0, -4.0]);
        check(
            &hs_problem(113).unwrap(),
            753.0,
            &[-76.0, -117.0, -12.0, -105.0, -5.0, -4.0, -9.0, -10.0],
        );
        check(&hs_problem(227).unwrap(), 2.5, &[-0.25, -0.25]);
        check(&hs_problem(228).unwrap(), 0.0, &[-1.0, -9.0]);
        check(&hs_problem(264).unwrap(), 0.0, &[-8.0, -9.0, -5.0]);
        let p285 = hs_problem(285).unwrap();
        let (f0, c0) = p285.eval_raw(&p285.x0);
        assert_eq!(f0, 0.0);
        for (ci, bi) in c0.iter().zip(HS285_B) {
            assert_relative_eq!(*ci, -bi, max_relative = 1e-12);
        }
    }

    #[test]
    fn optima_are_feasible_with_pinned_values() {
        for p in all_problems() {
            let opt = p.known_optimum.as_ref().unwrap();
            let (f, c) = p.eval_raw(&opt.x_star);
            // hs100/hs113 optima are catalogued to seven digits, the rest in
            // closed form.
            let (f_tol, c_tol) = match p.name.as_str() {
                "hs100" | "hs113" => (2e-4, 1e-3),
                _ => (1e-9, 1e-9),
            };
            assert!(
                (f - opt.f_star).abs() <= f_tol * opt.f_star.abs().max(1.0),
                "{}: f(x*) = {f}, expected {}",
                p.name,
                opt.f_star
            );
            for (i, ci) in c.iter().enumerate() {
                assert!(*ci <= c_tol, "{}: c{}(x*) = {}", p.name, i, ci);
            }
        }
    }

    #[test]
    fn starting_points_are_strictly_feasible() {
        for p in all_problems() {
            assert!(is_feasible(&p, &p.x0, 0.0), "{} starts infeasible", p.name);
        }
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        for p in all_problems() {
            let x0: Vec<f64> = p.x0.iter().cloned().collect();
            assert_gradient_matches(&p, &x0);
            // A second, asymmetric point exercises the cross terms.
            let x1: Vec<f64> = x0
                .iter()
                .enumerate()
                .map(|(j, v)| v + 0.1 + 0.03 * j as f64)
                .collect();
            assert_gradient_matches(&p, &x1);
        }
    }

    #[test]
    fn hs29_optimum_is_stationary() {
        // KKT at (4, 2√2, 2): ∇f + λ∇c = 0 with λ = √2/2.
        let p = hs_problem(29).unwrap();
        let x = &p.known_optimum.as_ref().unwrap().x_star;
        let (g, jc) = p.gradient(x);
        let lambda = 2.0_f64.sqrt() / 2.0;
        for j in 0..3 {
            assert_relative_eq!(g[j] + lambda * jc[(0, j)], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rosen_suzuki_variants_share_the_optimum() {
        for id in [43, 264] {
            let p = hs_problem(id).unwrap();
            let opt = p.known_optimum.as_ref().unwrap();
            let (f, c) = p.eval_raw(&opt.x_star);
            assert_relative_eq!(f, -44.0, epsilon = 1e-12);
            // First and third constraints active; the middle one active only
            // in the tighter variant.
            assert_relative_eq!(c[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(c[2], 0.0, epsilon = 1e-12);
            let expected_mid = if id == 264 { 0.0 } else { -1.0 };
            assert_relative_eq!(c[1], expected_mid, epsilon = 1e-12);
        }
    }

    #[test]
    fn hs285_construction_is_exactly_optimal() {
        let a = hs285_matrix();
        let total: f64 = HS285_C.iter().sum();
        assert_eq!(total, 8252.0);
        let b_total: f64 = HS285_B.iter().sum();
        for i in 0..10 {
            let row_sum: f64 = (0..15).map(|j| a[(i, j)]).sum();
            assert_relative_eq!(row_sum, HS285_B[i], max_relative = 1e-12);
            for j in 0..15 {
                assert!(a[(i, j)] > 0.0, "a[{i},{j}] = {}", a[(i, j)]);
            }
        }
        // Column sums proportional to the objective coefficients make the
        // all-ones point a KKT point with a single positive multiplier.
        let lambda = total / (2.0 * b_total);
        for j in 0..15 {
            let col_sum: f64 = (0..10).map(|i| a[(i, j)]).sum();
            assert_relative_eq!(
                2.0 * lambda * col_sum,
                HS285_C[j],
                max_relative = 1e-10
            );
        }
        // The perturbation really left the rank-one family.
        let r1 = a.row(0) / HS285_B[0];
        let r2 = a.row(1) / HS285_B[1];
        assert!((r1 - r2).norm() > 1e-3);
    }

    #[test]
    fn lookup_by_name_and_id() {
        assert!(problem_by_name("rosenbrock").is_some());
        assert!(problem_by_name("aniso-exp").is_some());
        assert!(problem_by_name("hs227").is_some());
        assert!(problem_by_name("hs999").is_none());
        assert!(problem_by_name("nope").is_none());
        match hs_problem(31) {
            Err(BenchError::UnknownProblemId(31)) => {}
            other => panic!("expected UnknownProblemId, got {other:?}"),
        }
    }
}
