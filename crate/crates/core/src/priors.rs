//! Conjugate priors for matrix Langevin parameters.
//!
//! - JMDY (joint): `g(M, d, V) ∝ etr(ν V D M^T Ψ) / 0F1(n/2; D^2/4)^ν`.
//! - IMDY (on `d` alone): `g(d) ∝ exp(ν η^T d) / 0F1(n/2; D^2/4)^ν`.
//!
//! Normalizing constants of the priors are never needed; everything works
//! with unnormalized log densities.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langevin::{frob_dot, invert_h, H_SOLVE_TOL};
use crate::specfun::{log_norm_const, norm_const_partials, DEFAULT_TOL};
use crate::stiefel::compose;

/// Tail probability used to truncate the support of `d_1`.
pub const DEFAULT_EPS: f64 = 1e-4;
/// Number of envelope bins.
pub const DEFAULT_BINS: usize = 1000;

/// Spectral norms within this distance of 1 are reported as undetermined.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JmdyParams {
    pub nu: f64,
    pub psi: DMatrix<f64>,
}

impl JmdyParams {
    pub fn new(nu: f64, psi: DMatrix<f64>) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::Domain(format!("nu must be nonnegative, got {nu}")));
        }
        Ok(Self { nu, psi })
    }

    /// Integrability: proper when `||Ψ||_2 < 1`, improper when `> 1`;
    /// the boundary is not settled and is reported as such.
    pub fn check_proper(&self) -> Result<()> {
        let s = self.psi.singular_values().max();
        if (s - 1.0).abs() <= BOUNDARY_TOL {
            Err(Error::UndeterminedIntegrability)
        } else if s > 1.0 {
            Err(Error::Improper(format!("spectral norm of psi is {s} > 1")))
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImdyParams {
    pub nu: f64,
    pub eta: Vec<f64>,
    /// Ambient dimension `n` of the Stiefel manifold (enters through `0F1(n/2; ·)`).
    pub n: usize,
}

impl ImdyParams {
    pub fn new(nu: f64, eta: Vec<f64>, n: usize) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::Domain(format!("nu must be nonnegative, got {nu}")));
        }
        if eta.is_empty() || eta.len() > n || eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain(format!("eta must have 1..=n finite entries, got {eta:?}")));
        }
        Ok(Self { nu, eta, n })
    }

    pub fn p(&self) -> usize {
        self.eta.len()
    }

    /// Proper iff `ν > 0` and `max_j η_j < 1`.
    pub fn check_proper(&self) -> Result<()> {
        let max = self.eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max >= 1.0 {
            return Err(Error::Improper(format!("max eta = {max} >= 1")));
        }
        if !(self.nu > 0.0) {
            return Err(Error::Improper("nu = 0 gives a flat density".into()));
        }
        Ok(())
    }

    /// Conditional parameters after `n_obs` observations whose mean `X̄`
    /// has `φ_j = (M^T X̄ V)_jj`: `ν' = ν + N`, `η' = (ν η + N φ)/(ν + N)`.
    pub fn posterior(&self, n_obs: usize, phi: &[f64]) -> Result<Self> {
        if phi.len() != self.eta.len() {
            return Err(Error::Shape { expected: format!("{}", self.eta.len()), got: format!("{}", phi.len()) });
        }
        let nn = n_obs as f64;
        let nu = self.nu + nn;
        if nu == 0.0 {
            return Ok(self.clone());
        }
        let eta = self.eta.iter().zip(phi).map(|(e, f)| (self.nu * e + nn * f) / nu).collect();
        Ok(Self { nu, eta, n: self.n })
    }
}

/// `ν tr(V D M^T Ψ) - ν log 0F1(n/2; D^2/4)`.
pub fn jmdy_log_unnorm(m: &DMatrix<f64>, d: &[f64], v: &DMatrix<f64>, params: &JmdyParams) -> Result<f64> {
    let (n, p) = m.shape();
    if d.len() != p || v.shape() != (p, p) || params.psi.shape() != (n, p) {
        return Err(Error::Shape {
            expected: format!("M {n}x{p}, d {p}, V {p}x{p}, psi {n}x{p}"),
            got: format!("d {}, V {:?}, psi {:?}", d.len(), v.shape(), params.psi.shape()),
        });
    }
    if params.nu == 0.0 {
        return Ok(0.0);
    }
    let f = compose(m, d, v);
    Ok(params.nu * (frob_dot(&f, &params.psi) - log_norm_const(n, d, DEFAULT_TOL)?))
}

/// `ν η^T d - ν log 0F1(n/2; D^2/4)`.
pub fn imdy_log_unnorm(d: &[f64], params: &ImdyParams) -> Result<f64> {
    if d.len() != params.p() {
        return Err(Error::Shape { expected: format!("{}", params.p()), got: format!("{}", d.len()) });
    }
    if params.nu == 0.0 {
        return Ok(0.0);
    }
    let lin: f64 = params.eta.iter().zip(d).map(|(e, x)| e * x).sum();
    Ok(params.nu * (lin - log_norm_const(params.n, d, DEFAULT_TOL)?))
}

/// `η = h(d_mode)`: the modal parameter whose IMDY mode is `d_mode`.
pub fn eta_from_mode(d_mode: &[f64], n: usize) -> Result<Vec<f64>> {
    if d_mode.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Domain(format!("mode must be nonnegative, got {d_mode:?}")));
    }
    Ok(norm_const_partials(n, d_mode, DEFAULT_TOL)?.grad().to_vec())
}

/// Solves `h(d̂) = η`; independent of `ν`.
///
/// The coordinates of the result follow the order of `η` (a decreasing
/// `η` gives a decreasing mode).
pub fn imdy_mode(params: &ImdyParams) -> Result<Vec<f64>> {
    if let Some((j, &e)) = params.eta.iter().enumerate().find(|(_, e)| **e >= 1.0) {
        return Err(Error::Improper(format!("eta[{j}] = {e} >= 1")));
    }
    if let Some((j, &e)) = params.eta.iter().enumerate().find(|(_, e)| **e <= 0.0) {
        return Err(Error::NoMode { index: j, value: e });
    }
    invert_h(params.n, &params.eta, None, H_SOLVE_TOL)
}

/// Full conditional of `d_j` given the other coordinates under an IMDY law.
#[derive(Clone, Debug)]
pub struct ImdyConditional {
    params: ImdyParams,
    j: usize,
    d: Vec<f64>,
}

impl ImdyConditional {
    pub fn new(j: usize, d: &[f64], params: &ImdyParams) -> Result<Self> {
        if d.len() != params.p() || j >= d.len() {
            return Err(Error::Shape { expected: format!("j < p = {}", params.p()), got: format!("j = {j}, d {}", d.len()) });
        }
        if !(params.nu > 0.0) {
            return Err(Error::Improper("conditional with nu = 0".into()));
        }
        Ok(Self { params: params.clone(), j, d: d.to_vec() })
    }

    /// `log g_j(x)` up to a constant.
    pub fn try_log_g(&self, x: f64) -> Result<f64> {
        let mut d = self.d.clone();
        d[self.j] = x;
        let l = log_norm_const(self.params.n, &d, DEFAULT_TOL)?;
        Ok(self.params.nu * (self.params.eta[self.j] * x - l))
    }

    /// [`Self::try_log_g`], with `-∞` where the normalizing constant cannot
    /// be evaluated. Inside a support returned by [`Self::sampling_support`]
    /// this never happens: evaluation at its top has already succeeded and
    /// the series only gets shorter for smaller `x`.
    pub fn log_g(&self, x: f64) -> f64 {
        self.try_log_g(x).unwrap_or(f64::NEG_INFINITY)
    }

    fn score(&self, x: f64) -> Result<(f64, f64)> {
        let mut d = self.d.clone();
        d[self.j] = x;
        let e = norm_const_partials(self.params.n, &d, DEFAULT_TOL)?;
        let nu = self.params.nu;
        Ok((nu * (self.params.eta[self.j] - e.grad[self.j]), -nu * e.hess[self.j][self.j]))
    }

    /// Ordering support `(d_{j+1}, d_{j-1})` with sentinels `0` and `∞`.
    pub fn ordering_support(&self) -> (f64, f64) {
        let lo = if self.j + 1 < self.d.len() { self.d[self.j + 1] } else { 0.0 };
        let hi = if self.j > 0 { self.d[self.j - 1] } else { f64::INFINITY };
        (lo, hi)
    }

    /// Mode of the conditional restricted to `[lo, hi]`. With `η_j <= 0`
    /// the log density is decreasing and the mode is `lo`.
    pub fn mode(&self, lo: f64, hi: f64) -> Result<f64> {
        if self.params.eta[self.j] <= 0.0 || self.score(lo.max(1e-300))?.0 <= 0.0 {
            return Ok(lo);
        }
        if hi.is_finite() && self.score(hi)?.0 >= 0.0 {
            return Ok(hi);
        }
        // bracket [a, b] with score(a) > 0 > score(b)
        let mut a = lo;
        let mut b = if hi.is_finite() { hi } else { (2.0 * lo).max(1.0) };
        while self.score(b)?.0 > 0.0 {
            a = b;
            b *= 2.0;
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let (s, ds) = self.score(x)?;
            if s > 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = x - s / ds;
            x = if ds < 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (b - a) <= 1e-12 * b || s.abs() < 1e-13 * self.params.nu {
                break;
            }
        }
        Ok(x)
    }

    /// Smallest `B > m` (to relative precision 1e-9) with
    /// `g(B)/g(m) < eps`, found by doubling then bisection.
    pub fn right_tail_cutoff(&self, mode: f64, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("eps must be in (0, 1), got {eps}")));
        }
        if self.params.eta[self.j] >= 1.0 {
            return Err(Error::Improper(format!("eta[{}] >= 1: no finite right tail", self.j)));
        }
        let target = self.try_log_g(mode)? + eps.ln();
        let mut step = mode.max(1.0);
        let mut a = mode;
        let mut b = mode + step;
        while self.try_log_g(b)? >= target {
            a = b;
            step *= 2.0;
            b = mode + step;
            if b > 1e12 {
                return Err(Error::Improper("right tail does not decay".into()));
            }
        }
        while b - a > 1e-9 * b {
            let mid = 0.5 * (a + b);
            if self.try_log_g(mid)? < target {
                b = mid;
            } else {
                a = mid;
            }
        }
        Ok(b)
    }

    /// Bounded support used by the sampler: the ordering interval, with the
    /// unbounded top truncated at the `eps` right-tail cutoff.
    pub fn sampling_support(&self, eps: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.ordering_support();
        if !(hi > lo) {
            return Err(Error::EmptySupport { lo, hi });
        }
        let m = self.mode(lo, hi)?;
        let hi = if hi.is_finite() { hi } else { self.right_tail_cutoff(m, eps)? };
        Ok((lo, hi, m))
    }

    /// Piecewise-constant envelope on `(lo, hi]` with `n_bins` equal bins.
    pub fn envelope(&self, lo: f64, hi: f64, mode: f64, n_bins: usize) -> Result<BinnedEnvelope> {
        BinnedEnvelope::new(|x| self.log_g(x), lo, hi, mode, n_bins)
    }
}

/// Envelope `ḡ ≥ g` for a unimodal log-concave `g` on `(lo, hi]`: bins left
/// of the mode take `g` at their right edge, bins right of it at their left
/// edge, and the bin holding the mode takes `g(m)`.
#[derive(Clone, Debug)]
pub struct BinnedEnvelope {
    lo: f64,
    delta: f64,
    /// `log ḡ` per bin, relative to `log g(m)`.
    log_height: Vec<f64>,
    log_ref: f64,
    index: WeightedIndex<f64>,
}

impl BinnedEnvelope {
    pub fn new<G: Fn(f64) -> f64>(log_g: G, lo: f64, hi: f64, mode: f64, n_bins: usize) -> Result<Self> {
        if !(hi > lo) || !hi.is_finite() {
            return Err(Error::EmptySupport { lo, hi });
        }
        if n_bins == 0 {
            return Err(Error::Domain("need at least one bin".into()));
        }
        let delta = (hi - lo) / n_bins as f64;
        let mode = mode.clamp(lo, hi);
        let log_ref = log_g(mode);
        let k = (((mode - lo) / delta).floor() as usize).min(n_bins - 1);
        let edges: Vec<f64> = (0..=n_bins).map(|i| if i == n_bins { hi } else { lo + i as f64 * delta }).collect();
        let mut log_height = Vec::with_capacity(n_bins);
        for i in 0..n_bins {
            let h = if i < k {
                log_g(edges[i + 1])
            } else if i == k {
                log_ref
            } else {
                log_g(edges[i])
            };
            log_height.push(h - log_ref);
        }
        let weights: Vec<f64> = log_height.iter().map(|h| h.exp()).collect();
        let index = WeightedIndex::new(&weights).map_err(|e| Error::Domain(format!("envelope weights: {e}")))?;
        Ok(Self { lo, delta, log_height, log_ref, index })
    }

    pub fn n_bins(&self) -> usize {
        self.log_height.len()
    }

    /// One exact draw from `g` restricted to `(lo, hi]`, and the number of
    /// proposals it took.
    pub fn sample<G: Fn(f64) -> f64, R: Rng + ?Sized>(&self, log_g: G, rng: &mut R) -> (f64, usize) {
        let mut tries = 0;
        loop {
            tries += 1;
            let i = self.index.sample(rng);
            let left = self.lo + i as f64 * self.delta;
            let y = left + (1.0 - rng.random::<f64>()) * self.delta;
            let u: f64 = rng.random();
            if u.ln() <= log_g(y) - self.log_ref - self.log_height[i] {
                return (y, tries);
            }
        }
    }
}

/// `B` with `g_1(B)/g_1(m) < eps` for the conditional of `d_1` given the
/// remaining coordinates of `d` (`d[0]` is ignored).
pub fn right_tail_cutoff(params: &ImdyParams, d: &[f64], eps: f64) -> Result<f64> {
    let c = ImdyConditional::new(0, d, params)?;
    let (lo, hi) = c.ordering_support();
    let m = c.mode(lo, hi)?;
    c.right_tail_cutoff(m, eps)
}

/// Draws `d_j` from its IMDY full conditional on the ordering support,
/// truncated at the `eps = 1e-4` right-tail cutoff for `j = 0`.
pub fn imdy_conditional_sample<R: Rng + ?Sized>(
    j: usize,
    d: &[f64],
    params: &ImdyParams,
    rng: &mut R,
    n_bins: usize,
) -> Result<f64> {
    let c = ImdyConditional::new(j, d, params)?;
    let (lo, hi, m) = c.sampling_support(DEFAULT_EPS)?;
    let env = c.envelope(lo, hi, m, n_bins)?;
    Ok(env.sample(|x| c.log_g(x), rng).0)
}
