//! Finite mixtures of matrix Langevin distributions: priors, the Gibbs
//! sampler, initialization and posterior summaries.

mod hungarian;
mod init;
mod summary;
mod trace;

pub use hungarian::min_cost_assignment;
pub use init::{average_linkage, init_state};
pub use summary::{align_trace, posterior_summary, PosteriorSummary};
pub use trace::{ChainTrace, TraceRecord};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langevin::{frob_dot, MlParams, MlSampler};
use crate::priors::{ImdyConditional, ImdyParams, DEFAULT_BINS, DEFAULT_EPS};
use crate::specfun::{log_norm_const, DEFAULT_TOL};
use crate::stiefel::StiefelPoint;

/// Prior of one component: IMDY on `d`, and ML priors on `M` and `V`
/// given by their natural parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentPrior {
    pub nu: f64,
    pub eta: Vec<f64>,
    /// Natural parameter (`n x p`) of the ML prior on `M`.
    pub g0: DMatrix<f64>,
    /// Natural parameter (`p x p`) of the ML prior on `V`.
    pub h0: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureHyper {
    pub n: usize,
    pub p: usize,
    /// Dirichlet weights.
    pub alpha: Vec<f64>,
    pub components: Vec<ComponentPrior>,
}

impl MixtureHyper {
    pub fn num_components(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.alpha.len() != self.components.len() {
            return Err(Error::Config(format!(
                "{} Dirichlet weights for {} components",
                self.alpha.len(),
                self.components.len()
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0)) {
            return Err(Error::Config(format!("Dirichlet weights must be positive, got {a}")));
        }
        for (c, comp) in self.components.iter().enumerate() {
            if !(comp.nu >= 0.0) {
                return Err(Error::Config(format!("component {c}: nu = {} < 0", comp.nu)));
            }
            if comp.eta.len() != self.p || comp.eta.iter().any(|e| !(*e < 1.0)) {
                return Err(Error::Config(format!("component {c}: eta {:?} must have p entries below 1", comp.eta)));
            }
            if comp.g0.shape() != (self.n, self.p) || comp.h0.shape() != (self.p, self.p) {
                return Err(Error::Config(format!("component {c}: prior matrices have the wrong shape")));
            }
        }
        Ok(())
    }
}

/// Weakly informative prior: `α_c = 1`, `η_c = 0.01`, zero prior matrices
/// and a small positive `ν_c = nu`.
pub fn hyper_weak(c: usize, n: usize, p: usize, nu: f64) -> MixtureHyper {
    MixtureHyper {
        n,
        p,
        alpha: vec![1.0; c],
        components: (0..c)
            .map(|_| ComponentPrior {
                nu,
                eta: vec![0.01; p],
                g0: DMatrix::zeros(n, p),
                h0: DMatrix::zeros(p, p),
            })
            .collect(),
    }
}

/// Default `ν` of [`hyper_weak`].
pub const WEAK_NU: f64 = 1.0;

/// Empirical prior from rough estimates `(n†_c, M†_c, d†_c, V†_c)`:
/// `α_c = ν_c = n†_c/K†`, `η_c = h(d†_c)` (clipped below `1 - 1e-6`),
/// `G⁰_c = (n†_c/K†) M†_c`, `H⁰_c = (n†_c/K†) V†_c`.
pub fn hyper_from_estimates(estimates: &[MlParams], counts: &[f64], k_dagger: f64) -> Result<MixtureHyper> {
    if estimates.is_empty() || estimates.len() != counts.len() {
        return Err(Error::Config("one count per estimated component is required".into()));
    }
    if !(k_dagger > 0.0) {
        return Err(Error::Config(format!("K-dagger must be positive, got {k_dagger}")));
    }
    let (n, p) = (estimates[0].n(), estimates[0].p());
    let mut alpha = Vec::new();
    let mut components = Vec::new();
    for (est, &cnt) in estimates.iter().zip(counts) {
        // an empty rough cluster still needs a proper Dirichlet weight
        let w = cnt.max(1.0) / k_dagger;
        let eta: Vec<f64> = crate::priors::eta_from_mode(est.d(), n)?
            .into_iter()
            .map(|e| e.min(1.0 - 1e-6))
            .collect();
        alpha.push(w);
        components.push(ComponentPrior { nu: w, eta, g0: est.m() * w, h0: est.v() * w });
    }
    let hyper = MixtureHyper { n, p, alpha, components };
    hyper.validate()?;
    Ok(hyper)
}

/// EM started from [`init_state`] under the no-information JMDY prior
/// (`α_c = 1`, `Ψ_c = 0`, `ν_c = WEAK_NU`): the rough estimates behind the
/// empirical prior and the starting point of the chain. The small `ν`
/// shrinks `X̃_c` toward zero, which keeps a component that collapses onto
/// a handful of points from reaching unbounded concentration.
pub fn em_start<R: Rng + ?Sized>(data: &[StiefelPoint], c: usize, rng: &mut R) -> Result<crate::em::EmState> {
    let init = init_state(data, c, rng)?;
    let (n, p) = (data[0].n(), data[0].p());
    let prior = crate::em::EmPrior {
        alpha: vec![1.0; c],
        nu: vec![WEAK_NU; c],
        psi: vec![DMatrix::zeros(n, p); c],
    };
    crate::em::em_fit(data, &prior, &init.theta, &init.pi, &crate::em::EmConfig::default())
}

fn hyper_from_em(em: &crate::em::EmState, k_dagger: f64) -> Result<MixtureHyper> {
    let counts: Vec<f64> = (0..em.theta.len()).map(|k| em.responsibilities.column(k).sum()).collect();
    hyper_from_estimates(&em.theta, &counts, k_dagger)
}

/// Empirical prior: [`em_start`], then [`hyper_from_estimates`] with the
/// expected cluster sizes as `n†_c`.
pub fn hyper_empirical<R: Rng + ?Sized>(
    data: &[StiefelPoint],
    c: usize,
    k_dagger: f64,
    rng: &mut R,
) -> Result<MixtureHyper> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    hyper_from_em(&em_start(data, c, rng)?, k_dagger)
}

/// How the prior is chosen for a fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PriorRecipe {
    Weak,
    Empirical { k_dagger: f64 },
}

#[derive(Clone, Debug)]
pub struct MixtureFit {
    pub c: usize,
    pub hyper: MixtureHyper,
    pub em: crate::em::EmState,
    pub trace: ChainTrace,
}

/// Initialization, EM, prior construction and one Gibbs chain started at
/// the EM estimate.
pub fn fit_mixture<R: Rng + ?Sized>(
    data: &[StiefelPoint],
    c: usize,
    recipe: PriorRecipe,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<MixtureFit> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples { needed: 2 * c.max(1), got: 0 });
    }
    let em = em_start(data, c, rng)?;
    let hyper = match recipe {
        PriorRecipe::Weak => hyper_weak(c, data[0].n(), data[0].p(), WEAK_NU),
        PriorRecipe::Empirical { k_dagger } => hyper_from_em(&em, k_dagger)?,
    };
    let start = MixtureState { theta: em.theta.clone(), pi: em.pi.clone(), z: em.hard_labels() };
    let trace = gibbs_run(data, &hyper, &start, cfg, rng)?;
    Ok(MixtureFit { c, hyper, em, trace })
}

/// Parameters, weights and assignments of the mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureState {
    pub theta: Vec<MlParams>,
    pub pi: Vec<f64>,
    /// 0-based component of each point.
    pub z: Vec<usize>,
}

impl MixtureState {
    pub fn counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.theta.len()];
        for &z in &self.z {
            n[z] += 1;
        }
        n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Kept iterations.
    pub n_iter: usize,
    pub n_burnin: usize,
    pub n_bins: usize,
    pub eps: f64,
    pub sampler: MlSampler,
    /// Keep `z` in every trace record.
    pub store_z: bool,
    /// Hold `θ` at its initial value and sample only `z` and `π`.
    pub fixed_theta: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 1000,
            n_burnin: 1000,
            n_bins: DEFAULT_BINS,
            eps: DEFAULT_EPS,
            sampler: MlSampler::Exact,
            store_z: true,
            fixed_theta: false,
        }
    }
}

/// Column-major flattening of the data for fast inner products.
struct Flat {
    np: usize,
    x: Vec<f64>,
}

impl Flat {
    fn new(data: &[StiefelPoint]) -> Self {
        let np = data[0].n() * data[0].p();
        let mut x = Vec::with_capacity(np * data.len());
        for d in data {
            x.extend_from_slice(d.matrix().as_slice());
        }
        Self { np, x }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.np..(i + 1) * self.np]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unrestricted component state of the chain.
#[derive(Clone, Debug)]
struct Comp {
    m: DMatrix<f64>,
    d: Vec<f64>,
    v: DMatrix<f64>,
}

impl Comp {
    fn natural(&self) -> DMatrix<f64> {
        crate::stiefel::compose(&self.m, &self.d, &self.v)
    }
}

/// Natural parameter of the ML conditional of `M` (`n x p`) or `V`
/// (`p x p`): `S V D + G⁰` for `M` and `S^T M D + H⁰` for `V`, where `S` is
/// the component's sum of observations.
pub fn conditional_m_v_param(
    d: &[f64],
    other: &DMatrix<f64>,
    sum: &DMatrix<f64>,
    prior: &DMatrix<f64>,
    for_m: bool,
) -> DMatrix<f64> {
    let dd = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));
    if for_m {
        sum * other * dd + prior
    } else {
        sum.transpose() * other * dd + prior
    }
}

/// Per-sweep quantities of the state `(z, θ, π)` at the end of a sweep.
struct SweepStats {
    complete_loglik: f64,
    log_posterior: f64,
}

/// Runs the Gibbs sampler from `init` and returns the kept iterations.
///
/// One sweep draws every `z_i`, then for each component `M`, `V` and the
/// coordinates of `d` in turn, then `π`.
pub fn gibbs_run<R: Rng + ?Sized>(
    data: &[StiefelPoint],
    hyper: &MixtureHyper,
    init: &MixtureState,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<ChainTrace> {
    hyper.validate()?;
    let c = hyper.num_components();
    let (n, p) = (hyper.n, hyper.p);
    if p > 2 {
        return Err(Error::UnsupportedDimension(p));
    }
    if init.theta.len() != c || init.pi.len() != c || init.z.len() != data.len() {
        return Err(Error::Shape {
            expected: format!("{c} components and {} assignments", data.len()),
            got: format!("{} components, {} assignments", init.theta.len(), init.z.len()),
        });
    }
    if data.iter().any(|x| x.n() != n || x.p() != p) {
        return Err(Error::Shape { expected: format!("{n} x {p} data"), got: "mixed shapes".into() });
    }
    let flat = if data.is_empty() { Flat { np: n * p, x: Vec::new() } } else { Flat::new(data) };
    let mut comps: Vec<Comp> =
        init.theta.iter().map(|t| Comp { m: t.m().clone(), d: t.d().to_vec(), v: t.v().clone() }).collect();
    let mut pi = init.pi.clone();
    let mut z = init.z.clone();
    let mut log_r: Vec<f64> = comps.iter().map(|k| log_norm_const(n, &k.d, DEFAULT_TOL)).collect::<Result<_>>()?;
    let mut nat: Vec<DMatrix<f64>> = comps.iter().map(Comp::natural).collect();

    let total = cfg.n_burnin + cfg.n_iter;
    let mut trace = ChainTrace::new(n, p, c);
    let mut pending: Option<TraceRecord> = None;
    let mut lw = vec![0.0; c];
    for it in 0..total {
        // z | θ, π; the same pass gives the deviance of the previous state
        let log_pi: Vec<f64> = pi.iter().map(|x| x.ln()).collect();
        let mut loglik = 0.0;
        for (i, zi) in z.iter_mut().enumerate() {
            let xi = flat.row(i);
            let mut mx = f64::NEG_INFINITY;
            for k in 0..c {
                lw[k] = log_pi[k] + dot(nat[k].as_slice(), xi) - log_r[k];
                mx = mx.max(lw[k]);
            }
            let mut s = 0.0;
            for w in lw.iter_mut() {
                *w = (*w - mx).exp();
                s += *w;
            }
            loglik += mx + s.ln();
            let mut u = rng.random::<f64>() * s;
            let mut pick = c - 1;
            for (k, w) in lw.iter().enumerate() {
                if u < *w {
                    pick = k;
                    break;
                }
                u -= w;
            }
            *zi = pick;
        }
        if let Some(mut rec) = pending.take() {
            rec.deviance = -2.0 * loglik;
            trace.records.push(rec);
        }

        let mut counts = vec![0usize; c];
        let mut sums: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, p); c];
        for (i, &k) in z.iter().enumerate() {
            counts[k] += 1;
            let s = sums[k].as_mut_slice();
            for (a, b) in s.iter_mut().zip(flat.row(i)) {
                *a += b;
            }
        }

        if !cfg.fixed_theta {
            for k in 0..c {
                update_component(&mut comps[k], &hyper.components[k], &sums[k], counts[k], n, cfg, rng)?;
                log_r[k] = log_norm_const(n, &comps[k].d, DEFAULT_TOL)?;
                nat[k] = comps[k].natural();
            }
        }

        // π | z
        let mut g: Vec<f64> = Vec::with_capacity(c);
        for (alpha, &count) in hyper.alpha.iter().zip(&counts) {
            let shape = alpha + count as f64;
            let draw: f64 = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
            g.push(draw.max(1e-300));
        }
        let gs: f64 = g.iter().sum();
        pi = g.into_iter().map(|x| x / gs).collect();

        if it >= cfg.n_burnin {
            let stats = sweep_stats(&comps, &nat, &log_r, &pi, &sums, &counts, hyper);
            pending = Some(TraceRecord {
                iter: it,
                pi: pi.clone(),
                f: comps.iter().map(canonical_natural).collect(),
                z: cfg.store_z.then(|| z.clone()),
                deviance: f64::NAN,
                complete_loglik: stats.complete_loglik,
                log_posterior: stats.log_posterior,
            });
        }
    }
    if let Some(mut rec) = pending.take() {
        rec.deviance = mixture_deviance(&flat, &nat, &log_r, &pi);
        trace.records.push(rec);
    }
    Ok(trace)
}

/// `F` of a component after canonicalization (identical to the raw `M D V^T`).
fn canonical_natural(k: &Comp) -> DMatrix<f64> {
    k.natural()
}

fn update_component<R: Rng + ?Sized>(
    comp: &mut Comp,
    prior: &ComponentPrior,
    sum: &DMatrix<f64>,
    count: usize,
    n: usize,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<()> {
    let fm = conditional_m_v_param(&comp.d, &comp.v, sum, &prior.g0, true);
    comp.m = cfg.sampler.draw(&fm, rng);
    let fv = conditional_m_v_param(&comp.d, &comp.m, sum, &prior.h0, false);
    comp.v = cfg.sampler.draw(&fv, rng);

    // d | M, V: IMDY(ν + N_c, (ν η + N_c φ)/(ν + N_c)), φ_j = (M^T X̄ V)_jj
    let proj = comp.m.transpose() * sum * &comp.v;
    let nu = prior.nu + count as f64;
    if !(nu > 0.0) {
        return Err(Error::Improper("empty component with nu = 0 has a flat conditional for d".into()));
    }
    let eta: Vec<f64> = (0..comp.d.len()).map(|j| (prior.nu * prior.eta[j] + proj[(j, j)]) / nu).collect();
    let post = ImdyParams { nu, eta, n };
    for j in 0..comp.d.len() {
        let cond = ImdyConditional::new(j, &comp.d, &post)?;
        let (lo, hi, m) = cond.sampling_support(cfg.eps)?;
        let env = cond.envelope(lo, hi, m, cfg.n_bins)?;
        comp.d[j] = env.sample(|x| cond.log_g(x), rng).0;
    }
    Ok(())
}

fn sweep_stats(
    comps: &[Comp],
    nat: &[DMatrix<f64>],
    log_r: &[f64],
    pi: &[f64],
    sums: &[DMatrix<f64>],
    counts: &[usize],
    hyper: &MixtureHyper,
) -> SweepStats {
    let mut cl = 0.0;
    let mut prior = 0.0;
    for k in 0..comps.len() {
        let nk = counts[k] as f64;
        cl += nk * pi[k].ln() + frob_dot(&nat[k], &sums[k]) - nk * log_r[k];
        let pr = &hyper.components[k];
        let lin: f64 = pr.eta.iter().zip(&comps[k].d).map(|(e, d)| e * d).sum();
        prior += (hyper.alpha[k] - 1.0) * pi[k].ln() + pr.nu * (lin - log_r[k]) + frob_dot(&pr.g0, &comps[k].m)
            + frob_dot(&pr.h0, &comps[k].v);
    }
    SweepStats { complete_loglik: cl, log_posterior: cl + prior }
}

fn mixture_deviance(flat: &Flat, nat: &[DMatrix<f64>], log_r: &[f64], pi: &[f64]) -> f64 {
    let n_obs = flat.x.len().checked_div(flat.np).unwrap_or(0);
    let mut ll = 0.0;
    let mut lw = vec![0.0; nat.len()];
    for i in 0..n_obs {
        let xi = flat.row(i);
        for k in 0..nat.len() {
            lw[k] = pi[k].ln() + dot(nat[k].as_slice(), xi) - log_r[k];
        }
        ll += log_sum_exp(&lw);
    }
    -2.0 * ll
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// `-2 Σ_i log Σ_c π_c f(X_i | θ_c)`.
pub fn deviance(data: &[StiefelPoint], theta: &[MlParams], pi: &[f64]) -> Result<f64> {
    let nat: Vec<DMatrix<f64>> = theta.iter().map(MlParams::natural).collect();
    let log_r: Vec<f64> = theta.iter().map(MlParams::log_norm_const).collect::<Result<_>>()?;
    if data.is_empty() {
        return Ok(0.0);
    }
    Ok(mixture_deviance(&Flat::new(data), &nat, &log_r, pi))
}
