//! MAP estimation for the mixture by expectation–maximization, with a
//! Dirichlet prior on the weights and a JMDY prior on each component.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::langevin::{fit_from_mean, frob_dot, invert_h, MlParams};
use crate::mixture::log_sum_exp;
use crate::stiefel::StiefelPoint;

#[derive(Clone, Debug, PartialEq)]
pub struct EmPrior {
    /// Dirichlet weights; the weight update is `(α_c + N_c) / (N + Σ α)`.
    pub alpha: Vec<f64>,
    /// JMDY concentration and modal matrix of each component.
    pub nu: Vec<f64>,
    pub psi: Vec<DMatrix<f64>>,
}

impl EmPrior {
    /// No prior information: plain maximum likelihood.
    pub fn flat(c: usize, n: usize, p: usize) -> Self {
        Self { alpha: vec![0.0; c], nu: vec![0.0; c], psi: vec![DMatrix::zeros(n, p); c] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop when the relative change of the objective falls below this.
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct EmState {
    pub theta: Vec<MlParams>,
    pub pi: Vec<f64>,
    /// `N x C` posterior membership probabilities.
    pub responsibilities: DMatrix<f64>,
    pub objective: f64,
    /// Objective at the start of every iteration, then at the final state.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmState {
    /// Largest decrease between consecutive objective values (0 if none).
    pub fn max_decrease(&self) -> f64 {
        self.history.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        self.responsibilities
            .row_iter()
            .map(|r| (0..r.len()).fold(0, |b, k| if r[k] > r[b] { k } else { b }))
            .collect()
    }
}

/// Solves `h(d) = target` for the matrix hypergeometric function with
/// parameter `a = n/2`.
pub fn nr_solve_d(target: &[f64], a: f64, init: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    let n = (2.0 * a).round();
    if !(n >= target.len() as f64) || (2.0 * a - n).abs() > 1e-12 {
        return Err(Error::Domain(format!("a = {a} must be n/2 with n >= {}", target.len())));
    }
    invert_h(n as usize, target, init, tol)
}

/// E-step: responsibilities and the observed-data log likelihood.
fn e_step(data: &[StiefelPoint], theta: &[MlParams], pi: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    let c = theta.len();
    let nat: Vec<DMatrix<f64>> = theta.iter().map(MlParams::natural).collect();
    let log_r: Vec<f64> = theta.iter().map(MlParams::log_norm_const).collect::<Result<_>>()?;
    let mut resp = DMatrix::zeros(data.len(), c);
    let mut ll = 0.0;
    let mut lw = vec![0.0; c];
    for (i, x) in data.iter().enumerate() {
        for k in 0..c {
            lw[k] = pi[k].ln() + frob_dot(&nat[k], x.matrix()) - log_r[k];
        }
        let lse = log_sum_exp(&lw);
        ll += lse;
        for k in 0..c {
            resp[(i, k)] = (lw[k] - lse).exp();
        }
    }
    Ok((resp, ll))
}

fn log_prior(theta: &[MlParams], pi: &[f64], prior: &EmPrior) -> Result<f64> {
    let mut lp = 0.0;
    for (k, t) in theta.iter().enumerate() {
        if prior.alpha[k] != 0.0 {
            lp += prior.alpha[k] * pi[k].ln();
        }
        if prior.nu[k] != 0.0 {
            lp += prior.nu[k] * (frob_dot(&t.natural(), &prior.psi[k]) - t.log_norm_const()?);
        }
    }
    Ok(lp)
}

/// Runs EM from `(theta, pi)`.
///
/// The component update maximizes `tr(F^T (S_c + ν_c Ψ_c)) - (N_c + ν_c) log R(d)`
/// with `S_c = Σ_i r_ic X_i`: the signed SVD of
/// `X̃_c = (S_c + ν_c Ψ_c) / (N_c + ν_c)` and `h(d) = ` its singular values.
/// A component whose `X̃_c` admits no finite concentration keeps its
/// previous parameters, which keeps the objective nondecreasing.
pub fn em_fit(
    data: &[StiefelPoint],
    prior: &EmPrior,
    theta: &[MlParams],
    pi: &[f64],
    cfg: &EmConfig,
) -> Result<EmState> {
    let c = theta.len();
    if c == 0 || pi.len() != c || prior.alpha.len() != c || prior.nu.len() != c || prior.psi.len() != c {
        return Err(Error::Config("EM needs matching numbers of components, weights and priors".into()));
    }
    if data.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let (n, p) = data[0].matrix().shape();
    let n_obs = data.len() as f64;
    let alpha_sum: f64 = prior.alpha.iter().sum();
    let mut theta = theta.to_vec();
    let mut pi = pi.to_vec();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let (mut resp, mut ll) = e_step(data, &theta, &pi)?;
    let mut obj = ll + log_prior(&theta, &pi, prior)?;
    history.push(obj);
    while iterations < cfg.max_iter {
        iterations += 1;
        for k in 0..c {
            let nk: f64 = resp.column(k).sum();
            pi[k] = ((prior.alpha[k] + nk) / (n_obs + alpha_sum)).max(1e-300);
            let mut s = &prior.psi[k] * prior.nu[k];
            for (i, x) in data.iter().enumerate() {
                s += x.matrix() * resp[(i, k)];
            }
            let w = nk + prior.nu[k];
            if w < 1e-12 {
                continue;
            }
            if let Ok(fit) = fit_from_mean(&(s / w), Some(theta[k].d())) {
                theta[k] = fit;
            }
        }
        let prev = obj;
        (resp, ll) = e_step(data, &theta, &pi)?;
        obj = ll + log_prior(&theta, &pi, prior)?;
        history.push(obj);
        if ((obj - prev) / prev.abs().max(1.0)).abs() < cfg.tol {
            converged = true;
            break;
        }
    }
    debug_assert!(theta.iter().all(|t| t.n() == n && t.p() == p));
    Ok(EmState { theta, pi, responsibilities: resp, objective: obj, history, iterations, converged })
}
