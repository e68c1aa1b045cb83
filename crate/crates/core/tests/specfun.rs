//! Special-function accuracy and structural properties.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use stiefelmix::specfun::{
    hyp0f1_partials1, hyp0f1_partials2, log_hyp0f1, log_hyp0f1_matrix2, mc_hyp0f1_oracle,
};
use stiefelmix::stiefel::haar_sample;

const TOL: f64 = 1e-12;

fn reference() -> Value {
    let raw = include_str!("data/hyp0f1_reference.json");
    serde_json::from_str(raw).expect("valid reference json")
}

fn num(v: &Value) -> f64 {
    v.as_str().expect("string number").parse().expect("float")
}

#[test]
fn scalar_matches_high_precision_reference() {
    let r = reference();
    for case in r["scalar"].as_array().unwrap() {
        let a = case["a"].as_f64().unwrap();
        let y = case["y"].as_f64().unwrap();
        let want = num(&case["log_value"]);
        let got = log_hyp0f1(a, y, TOL).unwrap();
        // relative error of the value = absolute error of its log
        let err = (got - want).abs();
        assert!(err <= 1e-12 * want.abs().max(1.0), "a={a} y={y}: got {got}, want {want}, err {err:e}");
    }
}

#[test]
fn matrix_value_gradient_hessian_match_reference() {
    let r = reference();
    for case in r["matrix"].as_array().unwrap() {
        let a = case["a"].as_f64().unwrap();
        let d = [case["d"][0].as_f64().unwrap(), case["d"][1].as_f64().unwrap()];
        let want = num(&case["log_value"]);
        let got = log_hyp0f1_matrix2(a, d, TOL).unwrap();
        assert!((got - want).abs() <= 1e-11 * want.abs().max(1.0), "a={a} d={d:?}: {got} vs {want}");

        let e = hyp0f1_partials2(a, d, TOL).unwrap();
        assert!((e.log_value - want).abs() <= 1e-11 * want.abs().max(1.0));
        for j in 0..2 {
            let g = num(&case["grad"][j]);
            assert!((e.grad[j] - g).abs() <= 1e-10 * g.abs(), "a={a} d={d:?} grad[{j}]: {} vs {g}", e.grad[j]);
            for k in 0..2 {
                let h = num(&case["hess"][j][k]);
                let err = (e.hess[j][k] - h).abs();
                assert!(err <= 1e-7 * h.abs() + 1e-12, "a={a} d={d:?} hess[{j}][{k}]: {} vs {h}", e.hess[j][k]);
            }
        }
    }
}

#[test]
fn closed_form_identities() {
    assert_eq!(log_hyp0f1(2.0, 0.0, TOL).unwrap(), 0.0);
    let v = log_hyp0f1(0.5, 1.0, TOL).unwrap();
    assert!((v - 2f64.cosh().ln()).abs() < 1e-14);
    let v = log_hyp0f1(1.5, 1.0, TOL).unwrap();
    assert!((v - (2f64.sinh() / 2.0).ln()).abs() < 1e-14);
    assert_eq!(log_hyp0f1_matrix2(1.5, [0.0, 0.0], TOL).unwrap(), 0.0);
    let m = log_hyp0f1_matrix2(1.5, [3.0, 0.0], TOL).unwrap();
    assert!((m - log_hyp0f1(1.5, 2.25, TOL).unwrap()).abs() < 1e-14);
}

#[test]
fn overflow_safe_far_beyond_1e4() {
    for y in [1e4, 1e6, 1e8] {
        let v = log_hyp0f1(1.5, y, TOL).unwrap();
        let x = 2.0 * f64::sqrt(y);
        assert!((v - (x - x.ln() - 2f64.ln()).abs()).abs() < 1e-9 * v, "y={y}");
    }
}

#[test]
fn partials_vanish_at_origin() {
    let e = hyp0f1_partials2(1.5, [1e-9, 5e-10], TOL).unwrap();
    assert!(e.grad[0] < 1e-8 && e.grad[1] < 1e-8);
    let e = hyp0f1_partials1(1.5, 0.0, TOL).unwrap();
    assert_eq!(e.grad[0], 0.0);
}

#[test]
fn scalar_case_gradient_is_bessel_ratio() {
    // n = 3: 0F1(3/2; d^2/4) = sinh(d)/d and h(d) = coth d - 1/d
    for d in [0.1, 1.0, 4.0, 30.0, 200.0] {
        let e = hyp0f1_partials1(1.5, d, TOL).unwrap();
        let h = 1.0 / d.tanh() - 1.0 / d;
        assert!((e.grad[0] - h).abs() < 1e-13, "d={d}");
        let hp = 1.0 / (d * d) - 1.0 / d.sinh().powi(2);
        assert!((e.hess[0][0] - hp).abs() < 1e-9 * hp.abs() + 1e-15, "d={d}: {} vs {hp}", e.hess[0][0]);
    }
}

const GRID: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

#[test]
fn gradient_and_hessian_match_central_differences() {
    let a = 1.5;
    let step = 1e-5;
    for &d1 in &GRID {
        for &d2 in &GRID {
            let e = hyp0f1_partials2(a, [d1, d2], TOL).unwrap();
            let f = |u: f64, v: f64| log_hyp0f1_matrix2(a, [u, v], 1e-15).unwrap();
            let g1 = (f(d1 + step, d2) - f(d1 - step, d2)) / (2.0 * step);
            let g2 = (f(d1, d2 + step) - f(d1, d2 - step)) / (2.0 * step);
            assert!((e.grad[0] - g1).abs() < 1e-4 * g1.abs(), "grad1 at ({d1},{d2})");
            assert!((e.grad[1] - g2).abs() < 1e-4 * g2.abs(), "grad2 at ({d1},{d2})");
            // Hessian by differencing the analytic gradient
            let hp = |u: f64, v: f64| hyp0f1_partials2(a, [u, v], TOL).unwrap().grad;
            let (p1, m1) = (hp(d1 + step, d2), hp(d1 - step, d2));
            let (p2, m2) = (hp(d1, d2 + step), hp(d1, d2 - step));
            let fd = [
                [(p1[0] - m1[0]) / (2.0 * step), (p2[0] - m2[0]) / (2.0 * step)],
                [(p1[1] - m1[1]) / (2.0 * step), (p2[1] - m2[1]) / (2.0 * step)],
            ];
            for j in 0..2 {
                for k in 0..2 {
                    let err = (e.hess[j][k] - fd[j][k]).abs();
                    assert!(
                        err < 1e-4 * fd[j][k].abs() + 1e-9,
                        "hess[{j}][{k}] at ({d1},{d2}): {} vs {}",
                        e.hess[j][k],
                        fd[j][k]
                    );
                }
            }
        }
    }
}

#[test]
fn upper_bound_etr_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
        for a in [1.0, 1.5, 2.5] {
            let v = log_hyp0f1_matrix2(a, d, TOL).unwrap();
            assert!(v <= d[0] + d[1], "a={a} d={d:?}");
        }
    }
}

/// Haar mass of `{X : ||X - I*||_2 < delta}` on V_{3,2}.
fn ball_mass(delta: f64, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let istar = DMatrix::<f64>::identity(3, 2);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = haar_sample(3, 2, rng);
        let diff = x.matrix() - &istar;
        let s = diff.singular_values();
        if s.max() < delta {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

#[test]
fn lower_bound_with_estimated_ball_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let delta = 0.5;
    let k = ball_mass(delta, 200_000, &mut rng);
    assert!(k > 0.0);
    for _ in 0..100 {
        let d = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
        let v = log_hyp0f1_matrix2(1.5, d, TOL).unwrap();
        assert!(v > k.ln() + (1.0 - delta) * (d[0] + d[1]), "d={d:?}");
    }
}

#[test]
fn sandwich_and_hessian_psd_on_grid() {
    for a in [1.0, 1.5, 2.5] {
        for &d1 in &GRID {
            for &d2 in &GRID {
                let e = hyp0f1_partials2(a, [d1, d2], TOL).unwrap();
                assert!(e.grad.iter().all(|g| *g > 0.0 && *g < 1.0), "{a} {d1} {d2}");
                let h = e.hess;
                assert!(h[0][0] >= 0.0 && h[1][1] >= 0.0);
                assert!(h[0][0] * h[1][1] - h[0][1] * h[1][0] >= -1e-12);
            }
        }
    }
}

#[test]
fn monte_carlo_oracle_agrees_at_moderate_concentration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in [[2.0, 1.0], [1.0, 0.5]] {
        let mc = mc_hyp0f1_oracle(3, &d, 200_000, &mut rng).unwrap();
        let v = log_hyp0f1_matrix2(1.5, d, TOL).unwrap().exp();
        assert!((mc.estimate - v).abs() < 3.0 * mc.std_error, "{d:?}: {mc:?} vs {v}");
        assert!(mc.estimate <= (d[0] + d[1]).exp() * (1.0 + 3.0 * mc.std_error / mc.estimate));
    }
    let mc = mc_hyp0f1_oracle(3, &[0.0, 0.0], 1000, &mut rng).unwrap();
    assert_eq!(mc.estimate, 1.0);
    assert_eq!(mc.std_error, 0.0);
    assert!(mc_hyp0f1_oracle(3, &[1.0, 1.0], 10, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn midpoint_log_convexity(
        a1 in 0.0f64..40.0, a2 in 0.0f64..40.0,
        b1 in 0.0f64..40.0, b2 in 0.0f64..40.0,
        lam in prop::sample::select(vec![0.25, 0.5, 0.75]),
    ) {
        let f = |d: [f64; 2]| log_hyp0f1_matrix2(1.5, d, TOL).unwrap();
        let mid = [lam * a1 + (1.0 - lam) * b1, lam * a2 + (1.0 - lam) * b2];
        prop_assert!(f(mid) <= lam * f([a1, a2]) + (1.0 - lam) * f([b1, b2]) + 1e-10);
    }

    #[test]
    fn scalar_matrix_consistency(x in 0.0f64..200.0, a in 1.0f64..6.0) {
        let m = log_hyp0f1_matrix2(a, [x, 0.0], TOL).unwrap();
        let s = log_hyp0f1(a, x * x / 4.0, TOL).unwrap();
        prop_assert!((m - s).abs() <= 1e-10 * s.abs().max(1e-300));
    }

    #[test]
    fn derivative_sandwich(d1 in 1e-3f64..150.0, d2 in 1e-3f64..150.0, n in 2usize..8) {
        let e = hyp0f1_partials2(n as f64 / 2.0, [d1, d2], TOL).unwrap();
        prop_assert!(e.grad[0] > 0.0 && e.grad[0] < 1.0);
        prop_assert!(e.grad[1] > 0.0 && e.grad[1] < 1.0);
    }
}
