//! Choosing the number of components by deviance information criteria.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{fit_mixture, ChainTrace, GibbsConfig, MixtureFit, PriorRecipe};
use crate::stiefel::StiefelPoint;

/// Caps the worker pool of [`select_k`].
pub const THREADS_ENV: &str = "STIEFELMIX_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Dic,
    Dic5,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dic" => Ok(Self::Dic),
            "dic5" => Ok(Self::Dic5),
            _ => Err(Error::Config(format!("unknown criterion '{s}' (expected dic or dic5)"))),
        }
    }
}

fn check_len(trace: &ChainTrace) -> Result<()> {
    if trace.records.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: trace.records.len() });
    }
    Ok(())
}

/// Mean deviance and the variance-based effective number of parameters
/// `Σ_i (Dev_i - mean)² / (2 (S - 1))`.
pub fn dic_parts(trace: &ChainTrace) -> Result<(f64, f64)> {
    check_len(trace)?;
    let dev = trace.deviances();
    if let Some(bad) = dev.iter().find(|d| !d.is_finite()) {
        return Err(Error::Domain(format!("non-finite deviance {bad} in trace")));
    }
    let s = dev.len() as f64;
    let mean = dev.iter().sum::<f64>() / s;
    let ss: f64 = dev.iter().map(|d| (d - mean) * (d - mean)).sum();
    Ok((mean, ss / (2.0 * (s - 1.0))))
}

/// `mean Dev + Σ_i (Dev_i - mean)² / (2 (S - 1))`.
pub fn dic_standard(trace: &ChainTrace) -> Result<f64> {
    let (mean, pd) = dic_parts(trace)?;
    Ok(mean + pd)
}

/// Complete-data criterion `-4 E[log f(x, z | θ)] + 2 log f(x, ẑ | θ̂)`, with
/// `(ẑ, θ̂)` the kept sweep of largest unnormalized log posterior. Uses only
/// quantities stored in the trace; a single record is enough.
pub fn dic5(trace: &ChainTrace) -> Result<f64> {
    if trace.records.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let s = trace.records.len() as f64;
    let mean = trace.records.iter().map(|r| r.complete_loglik).sum::<f64>() / s;
    let map = trace
        .records
        .iter()
        .max_by(|a, b| a.log_posterior.total_cmp(&b.log_posterior))
        .expect("nonempty trace");
    let v = -4.0 * mean + 2.0 * map.complete_loglik;
    if !v.is_finite() {
        return Err(Error::Domain("non-finite complete-data log likelihood in trace".into()));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub c: usize,
    pub dic: f64,
    pub dic5: f64,
    pub dev_bar: f64,
    pub effective_params: f64,
    /// Selected criterion plus `λ C`.
    pub score: f64,
}

impl CandidateReport {
    pub fn from_trace(c: usize, trace: &ChainTrace, criterion: Criterion, penalty: f64) -> Result<Self> {
        let (dev_bar, pd) = dic_parts(trace)?;
        let d5 = dic5(trace)?;
        let base = match criterion {
            Criterion::Dic => dev_bar + pd,
            Criterion::Dic5 => d5,
        };
        Ok(Self { c, dic: dev_bar + pd, dic5: d5, dev_bar, effective_params: pd, score: base + penalty * c as f64 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DicReport {
    pub criterion: Criterion,
    pub penalty: f64,
    pub candidates: Vec<CandidateReport>,
    /// Candidates whose fit failed, with the error message.
    pub failures: Vec<(usize, String)>,
    pub chosen_c: usize,
}

impl DicReport {
    /// Picks the smallest score; ties go to the smaller `C`.
    pub fn new(criterion: Criterion, penalty: f64, mut candidates: Vec<CandidateReport>, failures: Vec<(usize, String)>) -> Result<Self> {
        candidates.sort_by_key(|r| r.c);
        let chosen = candidates
            .iter()
            .fold(None::<&CandidateReport>, |best, r| match best {
                Some(b) if b.score <= r.score => Some(b),
                _ => Some(r),
            })
            .ok_or_else(|| Error::Config(format!("every candidate failed: {failures:?}")))?
            .c;
        Ok(Self { criterion, penalty, candidates, failures, chosen_c: chosen })
    }

    /// Plain-text table: number of clusters against criterion values.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>18} | {:>12} | {:>12} | {:>12} | {:>10}", "Number of Clusters", "DIC Value", "DIC5 Value", "mean Dev", "pD");
        for r in &self.candidates {
            let mark = if r.c == self.chosen_c { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:>18} | {:>12.2} | {:>12.2} | {:>12.2} | {:>10.2}{mark}",
                r.c, r.dic, r.dic5, r.dev_bar, r.effective_params
            );
        }
        for (c, e) in &self.failures {
            let _ = writeln!(s, "{c:>18} | failed: {e}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub candidates: Vec<usize>,
    pub recipe: PriorRecipe,
    pub gibbs: GibbsConfig,
    pub criterion: Criterion,
    pub penalty: f64,
    pub seed: u64,
    /// Worker threads; defaults to the number of candidates, capped by
    /// `STIEFELMIX_THREADS`.
    pub threads: Option<usize>,
}

/// Independent stream of the chain for `c` components.
pub fn candidate_rng(seed: u64, c: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(c as u64);
    rng
}

pub fn worker_threads(requested: Option<usize>, n_candidates: usize) -> usize {
    let mut t = requested.unwrap_or(n_candidates).max(1);
    if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        t = t.min(cap.max(1));
    }
    t
}

/// Fits every candidate (in parallel, one RNG stream per `C`) and reports
/// both criteria. Failed candidates are recorded and skipped.
pub fn select_k(data: &[StiefelPoint], cfg: &SelectConfig) -> Result<(DicReport, Vec<MixtureFit>)> {
    if cfg.candidates.is_empty() {
        return Err(Error::Config("no candidate numbers of components".into()));
    }
    let threads = worker_threads(cfg.threads, cfg.candidates.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(usize, Result<MixtureFit>)> = pool.install(|| {
        cfg.candidates
            .par_iter()
            .map(|&c| (c, fit_mixture(data, c, cfg.recipe, &cfg.gibbs, &mut candidate_rng(cfg.seed, c))))
            .collect()
    });
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut fits = Vec::new();
    for (c, r) in results {
        match r.and_then(|fit| CandidateReport::from_trace(c, &fit.trace, cfg.criterion, cfg.penalty).map(|rep| (rep, fit))) {
            Ok((rep, fit)) => {
                reports.push(rep);
                fits.push(fit);
            }
            Err(e) => failures.push((c, e.to_string())),
        }
    }
    Ok((DicReport::new(cfg.criterion, cfg.penalty, reports, failures)?, fits))
}
