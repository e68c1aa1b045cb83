//! Matrix Langevin density, sampler and point fit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefelmix::langevin::{
    ml_log_density, ml_mode, ml_point_fit, ml_sample, ml_sample_column_gibbs, ml_sample_natural_counted,
    vmf_sample, MlParams,
};
use stiefelmix::specfun::{norm_const_partials, DEFAULT_TOL};
use stiefelmix::stiefel::{haar_sample, StiefelPoint};

fn rotation3(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    let r = nalgebra::Rotation3::from_euler_angles(a, b, c);
    DMatrix::from_iterator(3, 3, r.matrix().iter().copied())
}

fn params(d: [f64; 2], seed: u64) -> MlParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = haar_sample(3, 2, &mut rng).into_matrix();
    let f = x * DMatrix::from_diagonal(&DVector::from_vec(d.to_vec()));
    MlParams::from_natural(&f).unwrap()
}

#[test]
fn density_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in [[1.0, 0.5], [4.0, 2.0], [8.0, 3.0]] {
        let p = params(d, 7);
        let n = 100_000;
        let (mut mean, mut m2) = (0.0, 0.0);
        for i in 0..n {
            let x = haar_sample(3, 2, &mut rng);
            let v = ml_log_density(&x, &p).unwrap().exp();
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let se = (m2 / (n - 1) as f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "d={d:?}: {mean} +- {se}");
    }
}

#[test]
fn near_zero_concentration_is_uniform_density() {
    let p = MlParams::new(DMatrix::identity(3, 2), vec![1e-8, 0.5e-8], DMatrix::identity(2, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = haar_sample(3, 2, &mut rng);
    assert!(ml_log_density(&x, &p).unwrap().abs() < 1e-7);
}

#[test]
fn mode_dominates_and_antipode_is_minimum() {
    let p = params([4.0, 2.0], 3);
    let mode = ml_mode(&p);
    let top = ml_log_density(&mode, &p).unwrap();
    let anti = StiefelPoint::new(-mode.matrix()).unwrap();
    let bottom = ml_log_density(&anti, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let x = haar_sample(3, 2, &mut rng);
        let v = ml_log_density(&x, &p).unwrap();
        assert!(v <= top && v >= bottom);
    }
}

#[test]
fn p_above_two_is_unsupported() {
    let p = MlParams::new(DMatrix::identity(4, 3), vec![3.0, 2.0, 1.0], DMatrix::identity(3, 3)).unwrap();
    let x = StiefelPoint::new(DMatrix::identity(4, 3)).unwrap();
    assert!(ml_log_density(&x, &p).is_err());
}

/// Entrywise mean and standard error of the sampled matrices.
fn moments(draws: &[DMatrix<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = draws.len() as f64;
    let (r, c) = draws[0].shape();
    let mut mean = DMatrix::zeros(r, c);
    for x in draws {
        mean += x;
    }
    mean /= n;
    let mut var = DMatrix::zeros(r, c);
    for x in draws {
        let e = x - &mean;
        var += e.component_mul(&e);
    }
    var /= n - 1.0;
    (mean, var.map(|v| (v / n).sqrt()))
}

/// `E[X] = M diag(h(d)) V^T`, the gradient of the log normalizer.
fn exact_mean(p: &MlParams) -> DMatrix<f64> {
    let e = norm_const_partials(p.n(), p.d(), DEFAULT_TOL).unwrap();
    stiefelmix::stiefel::compose(p.m(), e.grad(), p.v())
}

#[test]
fn sampler_mean_matches_normalizer_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (i, d) in [[4.0, 2.0], [0.8, 0.3], [25.0, 10.0], [200.0, 150.0]].iter().enumerate() {
        let p = params(*d, 10 + i as u64);
        let draws: Vec<_> = (0..40_000).map(|_| ml_sample(&p, &mut rng).into_matrix()).collect();
        let (mean, se) = moments(&draws);
        let want = exact_mean(&p);
        for k in 0..6 {
            let tol = 4.0 * se[k] + 1e-12;
            assert!((mean[k] - want[k]).abs() < tol, "d={d:?} entry {k}: {} vs {} (se {})", mean[k], want[k], se[k]);
        }
    }
}

#[test]
fn sampler_mean_matches_importance_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = params([4.0, 2.0], 20);
    let n = 100_000;
    let draws: Vec<_> = (0..n).map(|_| ml_sample(&p, &mut rng).into_matrix()).collect();
    let (mean, se) = moments(&draws);
    // self-normalized importance estimate of E[X] from Haar draws
    let mut wsum = 0.0;
    let mut acc = DMatrix::zeros(3, 2);
    let mut hist = Vec::with_capacity(n);
    for _ in 0..n {
        let x = haar_sample(3, 2, &mut rng);
        let w = ml_log_density(&x, &p).unwrap().exp();
        wsum += w;
        acc += x.matrix() * w;
        hist.push((w, x.into_matrix()));
    }
    let is_mean = acc / wsum;
    let mut is_var = DMatrix::<f64>::zeros(3, 2);
    for (w, x) in &hist {
        let e = (x - &is_mean) * (*w / wsum);
        is_var += e.component_mul(&e);
    }
    for k in 0..6 {
        let s = (se[k].powi(2) + is_var[k]).sqrt();
        assert!((mean[k] - is_mean[k]).abs() < 3.5 * s, "entry {k}: {} vs {}", mean[k], is_mean[k]);
    }
}

#[test]
fn sampler_near_uniform_has_zero_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = MlParams::new(DMatrix::identity(3, 2), vec![1e-8, 0.5e-8], DMatrix::identity(2, 2)).unwrap();
    let draws: Vec<_> = (0..10_000).map(|_| ml_sample(&p, &mut rng).into_matrix()).collect();
    let (mean, _) = moments(&draws);
    assert!(mean.amax() < 0.05, "{mean}");
}

#[test]
fn p1_concentrated_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = DMatrix::from_column_slice(3, 1, &[0.6, 0.0, 0.8]);
    let p = MlParams::new(m.clone(), vec![50.0], DMatrix::identity(1, 1)).unwrap();
    let draws: Vec<_> = (0..5000).map(|_| ml_sample(&p, &mut rng).into_matrix()).collect();
    let (mean, _) = moments(&draws);
    let cos = mean.column(0).dot(&m.column(0)) / mean.norm();
    assert!(cos.clamp(-1.0, 1.0).acos() < 0.05);
    // and the direct vMF kernel agrees on E[cos] = coth k - 1/k
    let g = DVector::from_vec(vec![0.0, 0.0, 50.0]);
    let n = 20_000;
    let mc: f64 = (0..n).map(|_| vmf_sample(&g, &mut rng)[2]).sum::<f64>() / n as f64;
    let want = 1.0 / 50f64.tanh() - 1.0 / 50.0;
    assert!((mc - want).abs() < 0.002, "{mc} vs {want}");
}

#[test]
fn exact_acceptance_rate_stays_high() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in [[1.0, 0.5], [7.0, 5.0], [50.0, 49.0], [1000.0, 999.0]] {
        let f = params(d, 30).natural();
        let tries: usize = (0..2000).map(|_| ml_sample_natural_counted(&f, &mut rng).1).sum();
        let rate = 2000.0 / tries as f64;
        assert!(rate > 0.5, "d={d:?}: acceptance {rate}");
    }
}

#[test]
fn column_gibbs_agrees_with_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p = params([7.0, 5.0], 40);
    let f = p.natural();
    let draws: Vec<_> = (0..4000).map(|_| ml_sample_column_gibbs(&f, 50, &mut rng).unwrap()).collect();
    let (mean, se) = moments(&draws);
    let want = exact_mean(&p);
    for k in 0..6 {
        assert!((mean[k] - want[k]).abs() < 4.0 * se[k] + 1e-3, "entry {k}");
    }
    assert!(ml_sample_column_gibbs(&DMatrix::identity(2, 2), 5, &mut rng).is_err());
}

#[test]
fn point_fit_recovers_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = params([4.0, 2.0], 50);
    let samples: Vec<_> = (0..10_000).map(|_| ml_sample(&p, &mut rng)).collect();
    let fit = ml_point_fit(&samples).unwrap();
    let f = p.natural();
    let rel = (fit.natural() - &f).norm() / f.norm();
    assert!(rel < 0.1, "relative error {rel}");
    // residual of h(d) = singular values of the mean
    let mut mean = DMatrix::zeros(3, 2);
    for s in &samples {
        mean += s.matrix();
    }
    mean /= samples.len() as f64;
    let sv = stiefelmix::stiefel::unique_svd(&mean).unwrap().d;
    let e = norm_const_partials(3, fit.d(), DEFAULT_TOL).unwrap();
    assert!((e.grad[0] - sv[0]).abs() < 1e-8 && (e.grad[1] - sv[1]).abs() < 1e-8);
}

#[test]
fn point_fit_is_rotation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = params([5.0, 1.0], 60);
    let samples: Vec<_> = (0..500).map(|_| ml_sample(&p, &mut rng)).collect();
    let q = rotation3(0.3, -1.1, 2.0);
    let rotated: Vec<_> = samples.iter().map(|s| StiefelPoint::new(&q * s.matrix()).unwrap()).collect();
    let a = ml_point_fit(&samples).unwrap().natural();
    let b = ml_point_fit(&rotated).unwrap().natural();
    assert!((&q * a - b).norm() < 1e-8);
}

#[test]
fn point_fit_near_uniform_gives_small_concentration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let samples: Vec<_> = (0..20_000).map(|_| haar_sample(3, 2, &mut rng)).collect();
    let fit = ml_point_fit(&samples).unwrap();
    assert!(fit.d()[0] < 0.2, "{:?}", fit.d());
}

#[test]
fn point_fit_needs_two_samples() {
    let x = StiefelPoint::new(DMatrix::identity(3, 2)).unwrap();
    assert!(ml_point_fit(&[x]).is_err());
}
