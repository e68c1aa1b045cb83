//! Points on the Stiefel manifold `V_{n,p} = {X in R^{n x p} : X^T X = I_p}`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Orthonormality tolerance, `max |X^T X - I|`.
pub const ORTHO_TOL: f64 = 1e-10;
/// Minimum gap between consecutive singular values (and to zero).
pub const SV_GAP_TOL: f64 = 1e-10;
/// Minimum magnitude of first-row entries of the left factor.
pub const SIGN_TOL: f64 = 1e-12;

/// An `n x p` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint {
    x: DMatrix<f64>,
}

impl StiefelPoint {
    /// Wraps `x` after checking orthonormality.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        validate(x)
    }

    /// Wraps `x` without checking. Callers guarantee orthonormality.
    pub(crate) fn from_matrix_unchecked(x: DMatrix<f64>) -> Self {
        debug_assert!(max_ortho_deviation(&x) < 1e-8);
        Self { x }
    }

    /// Orthonormalizes the columns of `x` (Gram-Schmidt, preserving the
    /// column order and the direction of the first column).
    pub fn orthonormalize(mut x: DMatrix<f64>) -> Result<Self> {
        gram_schmidt(&mut x)?;
        Ok(Self { x })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// `max |X^T X - I|` over all entries.
pub fn max_ortho_deviation(x: &DMatrix<f64>) -> f64 {
    let g = x.transpose() * x;
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Accepts `x` as a Stiefel point if it is orthonormal to [`ORTHO_TOL`].
///
/// ```
/// use nalgebra::DMatrix;
/// use stiefelmix::stiefel::validate;
/// assert!(validate(DMatrix::identity(3, 2)).is_ok());
/// assert!(validate(DMatrix::from_element(3, 2, 1.0)).is_err());
/// ```
pub fn validate(x: DMatrix<f64>) -> Result<StiefelPoint> {
    if x.ncols() == 0 || x.nrows() < x.ncols() {
        return Err(Error::Shape {
            expected: "n x p with n >= p >= 1".into(),
            got: format!("{} x {}", x.nrows(), x.ncols()),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotOrthonormal { max_deviation: f64::INFINITY });
    }
    let dev = max_ortho_deviation(&x);
    if dev > ORTHO_TOL {
        return Err(Error::NotOrthonormal { max_deviation: dev });
    }
    Ok(StiefelPoint { x })
}

/// Modified Gram-Schmidt with re-orthogonalization, in place.
pub(crate) fn gram_schmidt(x: &mut DMatrix<f64>) -> Result<()> {
    let p = x.ncols();
    for j in 0..p {
        for _pass in 0..2 {
            for i in 0..j {
                let dot = x.column(i).dot(&x.column(j));
                let ci = x.column(i).clone_owned();
                x.column_mut(j).axpy(-dot, &ci, 1.0);
            }
        }
        let norm = x.column(j).norm();
        if !(norm > 1e-300) {
            return Err(Error::NotOrthonormal { max_deviation: 1.0 });
        }
        x.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(())
}

/// Draws from the normalized Haar measure on `V_{n,p}`.
///
/// The columns of an `n x p` standard Gaussian matrix are orthonormalized
/// by Gram-Schmidt, i.e. the `Q` factor of a QR decomposition whose `R`
/// has positive diagonal; that factor is exactly Haar distributed.
pub fn haar_sample<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> StiefelPoint {
    assert!(p >= 1 && n >= p, "haar_sample requires n >= p >= 1");
    loop {
        let mut g = DMatrix::<f64>::from_fn(n, p, |_, _| rng.sample(StandardNormal));
        if gram_schmidt(&mut g).is_ok() {
            return StiefelPoint { x: g };
        }
    }
}

/// `M diag(d) V^T` with `M` in the positive-first-row subset and `d`
/// strictly descending and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedSvd {
    pub m: DMatrix<f64>,
    pub d: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SignedSvd {
    /// `M diag(d) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        compose(&self.m, &self.d, &self.v)
    }
}

/// `M diag(d) V^T`.
pub fn compose(m: &DMatrix<f64>, d: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut md = m.clone();
    for (j, dj) in d.iter().enumerate() {
        md.column_mut(j).scale_mut(*dj);
    }
    md * v.transpose()
}

/// Thin SVD with singular values sorted in descending order:
/// `(U [n x p], s [p], V [p x p])` with `F = U diag(s) V^T`.
pub fn svd_sorted(f: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (n, p) = f.shape();
    let svd = f.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let k = p.min(n);
    let mut uu = DMatrix::zeros(n, k);
    let mut vv = DMatrix::zeros(p, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate().take(k) {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &vt.row(src).transpose());
        s.push(svd.singular_values[src]);
    }
    (uu, s, vv)
}

/// The unique signed SVD of `F` (`n x p`, `n >= p`).
///
/// Column signs make every first-row entry of `M` positive. When such an
/// entry vanishes (within [`SIGN_TOL`]) the sign is fixed by the first
/// entry of the column that does not, which keeps the decomposition unique
/// for inputs such as `[I_2; 0] diag(3, 1)`; use [`unique_svd_strict`] to
/// reject those inputs instead.
///
/// ```
/// use nalgebra::DMatrix;
/// use stiefelmix::stiefel::unique_svd;
/// let f = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
/// let s = unique_svd(&f).unwrap();
/// assert!((s.d[0] - 3.0).abs() < 1e-12 && (s.d[1] - 1.0).abs() < 1e-12);
/// ```
pub fn unique_svd(f: &DMatrix<f64>) -> Result<SignedSvd> {
    signed_svd(f, false)
}

/// As [`unique_svd`] but a first-row entry of `M` within [`SIGN_TOL`] of
/// zero is a [`Error::SignAmbiguity`].
pub fn unique_svd_strict(f: &DMatrix<f64>) -> Result<SignedSvd> {
    signed_svd(f, true)
}

fn signed_svd(f: &DMatrix<f64>, strict: bool) -> Result<SignedSvd> {
    let (n, p) = f.shape();
    if p == 0 || n < p {
        return Err(Error::Shape { expected: "n x p with n >= p >= 1".into(), got: format!("{n} x {p}") });
    }
    let (mut m, d, mut v) = svd_sorted(f);
    for j in 0..p {
        let next = if j + 1 < p { d[j + 1] } else { 0.0 };
        if d[j] - next < SV_GAP_TOL {
            return Err(Error::DegenerateSingularValues { index: j, gap: d[j] - next });
        }
    }
    for j in 0..p {
        let first = m[(0, j)];
        let pivot = if first.abs() >= SIGN_TOL {
            first
        } else if strict {
            return Err(Error::SignAmbiguity { column: j, value: first });
        } else {
            m.column(j).iter().copied().find(|x| x.abs() >= SIGN_TOL).unwrap_or(1.0)
        };
        if pivot < 0.0 {
            m.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok(SignedSvd { m, d, v })
}

/// Principal-angle distance `sqrt(sum theta_i^2)` where `cos theta_i` are
/// the singular values of `X1^T X2`.
pub fn stiefel_distance(x1: &StiefelPoint, x2: &StiefelPoint) -> Result<f64> {
    if x1.x.shape() != x2.x.shape() {
        return Err(Error::Shape {
            expected: format!("{:?}", x1.x.shape()),
            got: format!("{:?}", x2.x.shape()),
        });
    }
    let c = x1.x.transpose() * &x2.x;
    let s = c.singular_values();
    Ok(s.iter().map(|&v| v.clamp(-1.0, 1.0).acos().powi(2)).sum::<f64>().sqrt())
}

/// Orthonormal basis (`n x (n-k)`) of the complement of the column span of
/// `y` (`n x k`, orthonormal columns).
pub(crate) fn orthogonal_complement(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = y.shape();
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n - k);
    let project = |v: &mut nalgebra::DVector<f64>, basis: &[nalgebra::DVector<f64>]| {
        for _ in 0..2 {
            for j in 0..k {
                let dot = y.column(j).dot(v);
                v.axpy(-dot, &y.column(j), 1.0);
            }
            for b in basis {
                let dot = b.dot(v);
                v.axpy(-dot, b, 1.0);
            }
        }
    };
    while basis.len() < n - k {
        // greedily take the coordinate vector with the largest residual
        let mut best: Option<nalgebra::DVector<f64>> = None;
        let mut best_norm = -1.0;
        for i in 0..n {
            let mut e = nalgebra::DVector::zeros(n);
            e[i] = 1.0;
            project(&mut e, &basis);
            let nr = e.norm();
            if nr > best_norm {
                best_norm = nr;
                best = Some(e);
            }
        }
        let mut v = best.expect("n > 0");
        v /= best_norm;
        basis.push(v);
    }
    DMatrix::from_columns(&basis)
}
