//! The matrix Langevin (von Mises–Fisher matrix) distribution on `V_{n,p}`,
//! `f(X) = etr(F^T X) / 0F1(n/2; D^2/4)` with respect to the normalized
//! Haar measure, `F = M D V^T`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::specfun::{log_hyp0f1, log_norm_const, norm_const_partials, DEFAULT_TOL};
use crate::stiefel::{
    compose, haar_sample, max_ortho_deviation, orthogonal_complement, svd_sorted, unique_svd,
    StiefelPoint, ORTHO_TOL, SIGN_TOL,
};

/// Parameters `(M, d, V)` of one matrix Langevin law in the unique signed
/// parametrization.
#[derive(Clone, Debug, PartialEq)]
pub struct MlParams {
    m: DMatrix<f64>,
    d: Vec<f64>,
    v: DMatrix<f64>,
}

impl MlParams {
    /// Validates `M` (orthonormal, sign-canonical columns), `d` (strictly
    /// descending, positive) and `V` (orthogonal).
    pub fn new(m: DMatrix<f64>, d: Vec<f64>, v: DMatrix<f64>) -> Result<Self> {
        let (n, p) = m.shape();
        if p == 0 || n < p || d.len() != p || v.shape() != (p, p) {
            return Err(Error::Shape {
                expected: format!("M n x p (n >= p), d of length p, V p x p; p = {p}"),
                got: format!("M {n} x {p}, d {}, V {:?}", d.len(), v.shape()),
            });
        }
        let dev = max_ortho_deviation(&m).max(max_ortho_deviation(&v));
        if dev > ORTHO_TOL {
            return Err(Error::NotOrthonormal { max_deviation: dev });
        }
        for j in 0..p {
            let next = if j + 1 < p { d[j + 1] } else { 0.0 };
            if !(d[j] > next) {
                return Err(Error::Domain(format!("concentrations must be strictly descending and positive, got {d:?}")));
            }
            let pivot = m.column(j).iter().copied().find(|x| x.abs() >= SIGN_TOL).unwrap_or(0.0);
            if pivot < 0.0 {
                return Err(Error::SignAmbiguity { column: j, value: m[(0, j)] });
            }
        }
        Ok(Self { m, d, v })
    }

    /// Canonical parameters of the natural parameter `F`.
    pub fn from_natural(f: &DMatrix<f64>) -> Result<Self> {
        let s = unique_svd(f)?;
        Ok(Self { m: s.m, d: s.d, v: s.v })
    }

    /// `F = M diag(d) V^T`.
    pub fn natural(&self) -> DMatrix<f64> {
        compose(&self.m, &self.d, &self.v)
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn p(&self) -> usize {
        self.m.ncols()
    }

    /// `log 0F1(n/2; D^2/4)`.
    pub fn log_norm_const(&self) -> Result<f64> {
        log_norm_const(self.n(), &self.d, DEFAULT_TOL)
    }
}

/// `tr(A^T B)`.
pub(crate) fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `log f(X) = tr(V D M^T X) - log 0F1(n/2; D^2/4)`.
pub fn ml_log_density(x: &StiefelPoint, params: &MlParams) -> Result<f64> {
    if x.matrix().shape() != params.m.shape() {
        return Err(Error::Shape {
            expected: format!("{:?}", params.m.shape()),
            got: format!("{:?}", x.matrix().shape()),
        });
    }
    if params.p() > 2 {
        return Err(Error::UnsupportedDimension(params.p()));
    }
    Ok(frob_dot(&params.natural(), x.matrix()) - params.log_norm_const()?)
}

/// The mode `M V^T`.
pub fn ml_mode(params: &MlParams) -> StiefelPoint {
    StiefelPoint::from_matrix_unchecked(&params.m * params.v.transpose())
}

/// One draw from the von Mises–Fisher law on `S^{q-1}` with natural
/// parameter `g` (mean direction `g/|g|`, concentration `|g|`).
///
/// Uses Wood's envelope for `q >= 2` and the exact two-point law for `q = 1`.
pub fn vmf_sample<R: Rng + ?Sized>(g: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let q = g.len();
    assert!(q >= 1, "vMF needs dimension >= 1");
    let kappa = g.norm();
    if q == 1 {
        // P(x = sign(g)) = e^k / (e^k + e^-k)
        let s = if g[0] >= 0.0 { 1.0 } else { -1.0 };
        let p_plus = 1.0 / (1.0 + (-2.0 * kappa).exp());
        let x = if rng.random::<f64>() < p_plus { s } else { -s };
        return DVector::from_element(1, x);
    }
    if kappa < 1e-12 {
        let mut x = DVector::<f64>::from_fn(q, |_, _| rng.sample(StandardNormal));
        let nr = x.norm();
        x /= nr;
        return x;
    }
    let mu = g / kappa;
    let m1 = (q - 1) as f64;
    let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * m1, 0.5 * m1).expect("valid beta parameters");
    let (w, one_minus_w) = loop {
        let z: f64 = beta.sample(rng);
        let denom = 1.0 - (1.0 - b) * z;
        let w = (1.0 - (1.0 + b) * z) / denom;
        let u: f64 = rng.random();
        if kappa * w + m1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break (w, 2.0 * b * z / denom);
        }
    };
    // uniform direction orthogonal to mu
    let mut v = DVector::<f64>::from_fn(q, |_, _| rng.sample(StandardNormal));
    loop {
        let dot = v.dot(&mu);
        v.axpy(-dot, &mu, 1.0);
        let nr = v.norm();
        if nr > 1e-8 {
            v /= nr;
            break;
        }
        v = DVector::<f64>::from_fn(q, |_, _| rng.sample(StandardNormal));
    }
    let sin = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
    mu * w + v * sin
}

/// `log 0F1(q/2; kappa^2/4)`, the log normalizer of `vMF_q(kappa)` relative
/// to the uniform law.
fn log_vmf_norm(q: usize, kappa: f64) -> f64 {
    log_hyp0f1(0.5 * q as f64, 0.25 * kappa * kappa, DEFAULT_TOL).expect("valid vMF normalizer arguments")
}

/// Exact draw from `ML(F)` for any natural parameter `F` (`n x p`),
/// including rank-deficient and zero `F`.
///
/// Rejection scheme: with `F = U S W^T` and `H = U S`, columns of
/// `Y = X W` are proposed sequentially, column `j` from the vMF law on the
/// unit sphere of the complement of the previous columns with parameter
/// `N^T h_j`. The target/proposal ratio is proportional to
/// `prod_j C_{n-j}(|N^T h_j|)`, bounded by `prod_j C_{n-j}(|h_j|)`.
pub fn ml_sample_natural<R: Rng + ?Sized>(f: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    ml_sample_natural_counted(f, rng).0
}

/// As [`ml_sample_natural`], also returning the number of proposals used.
pub fn ml_sample_natural_counted<R: Rng + ?Sized>(f: &DMatrix<f64>, rng: &mut R) -> (DMatrix<f64>, usize) {
    let (n, p) = f.shape();
    let (u, s, w) = svd_sorted(f);
    if s.first().copied().unwrap_or(0.0) < 1e-14 {
        return (haar_sample(n, p, rng).into_matrix(), 1);
    }
    let mut h = u;
    for (j, sj) in s.iter().enumerate() {
        h.column_mut(j).scale_mut(*sj);
    }
    let log_bound: Vec<f64> = (1..p).map(|j| log_vmf_norm(n - j, s[j])).collect();
    let mut tries = 0;
    loop {
        tries += 1;
        let mut y = DMatrix::<f64>::zeros(n, p);
        let first = vmf_sample(&h.column(0).clone_owned(), rng);
        y.set_column(0, &first);
        let mut log_ratio = 0.0;
        for j in 1..p {
            let basis = orthogonal_complement(&y.columns(0, j).clone_owned());
            let g = basis.transpose() * h.column(j);
            let z = vmf_sample(&g, rng);
            y.set_column(j, &(&basis * z));
            log_ratio += log_vmf_norm(n - j, g.norm()) - log_bound[j - 1];
        }
        let u: f64 = rng.random();
        if u.ln() <= log_ratio {
            return (y * w.transpose(), tries);
        }
    }
}

/// Exact draw from `ML(M, d, V)`.
pub fn ml_sample<R: Rng + ?Sized>(params: &MlParams, rng: &mut R) -> StiefelPoint {
    StiefelPoint::from_matrix_unchecked(ml_sample_natural(&params.natural(), rng))
}

/// Which kernel draws from `ML(F)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MlSampler {
    /// Sequential vMF proposals with an exact accept/reject correction.
    #[default]
    Exact,
    /// Column-wise Gibbs with the given number of sweeps (approximate).
    ColumnGibbs { sweeps: usize },
}

impl MlSampler {
    pub fn draw<R: Rng + ?Sized>(&self, f: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
        match *self {
            MlSampler::Exact => ml_sample_natural(f, rng),
            MlSampler::ColumnGibbs { sweeps } => match ml_sample_column_gibbs(f, sweeps, rng) {
                Ok(x) => x,
                // n = p: the column chain is reducible, use the exact kernel
                Err(_) => ml_sample_natural(f, rng),
            },
        }
    }
}

/// Approximate draw by column-wise Gibbs: each column of `X` is redrawn
/// from its vMF conditional on the unit sphere of the complement of the
/// other columns, for `sweeps` sweeps starting from the mode.
///
/// Only ergodic for `n > p` (for `n = p` each column is pinned up to sign).
pub fn ml_sample_column_gibbs<R: Rng + ?Sized>(
    f: &DMatrix<f64>,
    sweeps: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (n, p) = f.shape();
    if n <= p {
        return Err(Error::Domain(format!("column Gibbs needs n > p, got n={n}, p={p}")));
    }
    let (u, _, w) = svd_sorted(f);
    let mut x = u * w.transpose();
    for _ in 0..sweeps {
        for j in 0..p {
            let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
            let basis = if others.is_empty() {
                DMatrix::identity(n, n)
            } else {
                orthogonal_complement(&x.select_columns(&others))
            };
            let g = basis.transpose() * f.column(j);
            let z = vmf_sample(&g, rng);
            x.set_column(j, &(&basis * z));
        }
    }
    Ok(x)
}

/// Solves `h(d) = target` for `d > 0` by damped Newton on the convex
/// function `log 0F1(n/2; D^2/4) - target . d`, with a coordinate-wise
/// bisection fallback. Residual `max_j |h_j(d) - target_j| < tol`.
pub fn invert_h(n: usize, target: &[f64], init: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    let p = target.len();
    if !(1..=2).contains(&p) {
        return Err(Error::UnsupportedDimension(p));
    }
    if let Some((j, t)) = target.iter().enumerate().find(|(_, t)| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Infeasible(format!("target[{j}] = {t} outside (0, 1)")));
    }
    if n < p {
        return Err(Error::Domain(format!("n = {n} < p = {p}")));
    }
    let mut d: Vec<f64> = match init {
        Some(x) if x.len() == p && x.iter().all(|v| *v > 0.0 && v.is_finite()) => x.to_vec(),
        _ => target.iter().map(|&t| n as f64 * t / (1.0 - t * t)).collect(),
    };
    let obj = |e: &crate::specfun::Hyp0F1Eval, d: &[f64]| {
        e.log_value - target.iter().zip(d).map(|(t, x)| t * x).sum::<f64>()
    };
    let mut e = norm_const_partials(n, &d, DEFAULT_TOL)?;
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let g: Vec<f64> = (0..p).map(|j| e.grad[j] - target[j]).collect();
        residual = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual < tol {
            return Ok(d);
        }
        let step: Vec<f64> = if p == 1 {
            vec![-g[0] / e.hess[0][0]]
        } else {
            let h = e.hess;
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if !(det > 0.0) {
                break;
            }
            vec![-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[1][0] * g[0]) / det]
        };
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let f0 = obj(&e, &d);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = d.iter().zip(&step).map(|(x, s)| x + alpha * s).collect();
            if trial.iter().all(|x| *x > 0.0) {
                let et = norm_const_partials(n, &trial, DEFAULT_TOL)?;
                let ft = obj(&et, &trial);
                if ft <= f0 + 1e-4 * alpha * slope + 1e-13 * (1.0 + f0.abs()) {
                    d = trial;
                    e = et;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    bisection_fallback(n, target, d, tol).map_err(|_| Error::Iteration { iterations: 200, residual })
}

/// Gauss–Seidel sweeps of 1-D bisections on `h_j(d) = target_j`.
fn bisection_fallback(n: usize, target: &[f64], mut d: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    let p = target.len();
    for _ in 0..500 {
        for j in 0..p {
            let h_at = |x: f64, d: &mut Vec<f64>| -> Result<f64> {
                d[j] = x;
                Ok(norm_const_partials(n, d, DEFAULT_TOL)?.grad[j])
            };
            let mut lo = 0.0;
            let mut hi = d[j].max(1.0);
            while h_at(hi, &mut d)? < target[j] {
                lo = hi;
                hi *= 2.0;
                if hi > 1e8 {
                    return Err(Error::Iteration { iterations: 0, residual: f64::INFINITY });
                }
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if h_at(mid, &mut d)? < target[j] {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 * hi {
                    break;
                }
            }
            d[j] = 0.5 * (lo + hi);
        }
        let e = norm_const_partials(n, &d, DEFAULT_TOL)?;
        if (0..p).all(|j| (e.grad[j] - target[j]).abs() < tol) {
            return Ok(d);
        }
    }
    Err(Error::Iteration { iterations: 500, residual: f64::INFINITY })
}

/// Residual tolerance of the `h(d) = target` solves.
pub const H_SOLVE_TOL: f64 = 1e-10;

/// Fits `(M, d, V)` to a sample: signed SVD of the sample mean for `M, V`
/// and `h(d) = singular values of the mean` for `d`.
pub fn ml_point_fit(samples: &[StiefelPoint]) -> Result<MlParams> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    let (n, p) = samples[0].matrix().shape();
    let mut mean = DMatrix::<f64>::zeros(n, p);
    for s in samples {
        if s.matrix().shape() != (n, p) {
            return Err(Error::Shape { expected: format!("{n} x {p}"), got: format!("{:?}", s.matrix().shape()) });
        }
        mean += s.matrix();
    }
    mean /= samples.len() as f64;
    fit_from_mean(&mean, None)
}

/// `(M, d, V)` maximizing `tr(V D M^T Xbar) - log 0F1(n/2; D^2/4)`.
pub(crate) fn fit_from_mean(mean: &DMatrix<f64>, init: Option<&[f64]>) -> Result<MlParams> {
    let (n, _) = mean.shape();
    let (_, s, _) = svd_sorted(mean);
    if s[0] >= 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "largest singular value of the mean is {} >= 1; no finite concentration",
            s[0]
        )));
    }
    let svd = unique_svd(mean)?;
    let d = invert_h(n, &svd.d, init, H_SOLVE_TOL)?;
    if d.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::DegenerateSingularValues { index: 0, gap: 0.0 });
    }
    MlParams::new(svd.m, d, svd.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn istar() -> DMatrix<f64> {
        DMatrix::identity(3, 2)
    }

    #[test]
    fn params_validation() {
        assert!(MlParams::new(istar(), vec![4.0, 2.0], DMatrix::identity(2, 2)).is_ok());
        assert!(MlParams::new(istar(), vec![2.0, 4.0], DMatrix::identity(2, 2)).is_err());
        assert!(MlParams::new(istar(), vec![4.0, 0.0], DMatrix::identity(2, 2)).is_err());
        assert!(MlParams::new(-istar(), vec![4.0, 2.0], DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn mode_is_m_vt() {
        let p = MlParams::new(istar(), vec![4.0, 2.0], DMatrix::identity(2, 2)).unwrap();
        assert_eq!(ml_mode(&p).matrix(), &istar());
        let at_mode = ml_log_density(&ml_mode(&p), &p).unwrap();
        assert!((at_mode - (6.0 - p.log_norm_const().unwrap())).abs() < 1e-12);
    }

    #[test]
    fn invert_h_round_trip() {
        for d0 in [[4.0, 2.0], [0.3, 0.1], [60.0, 20.0], [7.0, 5.0]] {
            let e = norm_const_partials(3, &d0, DEFAULT_TOL).unwrap();
            let d = invert_h(3, e.grad(), None, 1e-12).unwrap();
            assert!((d[0] - d0[0]).abs() < 1e-6 * d0[0] && (d[1] - d0[1]).abs() < 1e-6 * d0[1], "{d0:?} -> {d:?}");
        }
        assert!(matches!(invert_h(3, &[1.0, 0.5], None, 1e-10), Err(Error::Infeasible(_))));
    }

    #[test]
    fn point_fit_rejects_identical_samples() {
        let x = StiefelPoint::new(istar()).unwrap();
        let err = ml_point_fit(&[x.clone(), x]).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn vmf_on_circle_and_s0() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let g = DVector::from_vec(vec![3.0, 0.0]);
        let mut mean = 0.0;
        for _ in 0..20000 {
            let x = vmf_sample(&g, &mut rng);
            assert!((x.norm() - 1.0).abs() < 1e-12);
            mean += x[0];
        }
        mean /= 20000.0;
        // E[cos] = I_1(3)/I_0(3)
        assert!((mean - 0.809_301_4).abs() < 0.01, "{mean}");
        let g = DVector::from_vec(vec![-0.5]);
        let mut plus = 0;
        for _ in 0..20000 {
            if vmf_sample(&g, &mut rng)[0] > 0.0 {
                plus += 1;
            }
        }
        let want = 1.0 / (1.0 + 1f64.exp());
        assert!((plus as f64 / 20000.0 - want).abs() < 0.015);
    }
}
