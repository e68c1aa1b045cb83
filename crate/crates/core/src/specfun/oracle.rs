//! Monte-Carlo estimate of `0F1(n/2; D^2/4)` as a Haar expectation,
//! `E[etr(D M^T X)]` with `M = [I_p; 0]`. Used as an independent test
//! oracle only.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stiefel::haar_sample;

/// A Monte-Carlo mean together with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Unbiased Monte-Carlo estimate of `0F1(n/2; D^2/4)` from `num_samples`
/// Haar draws on `V_{n,p}`, `p = d.len()`.
pub fn mc_hyp0f1_oracle<R: Rng + ?Sized>(
    n: usize,
    d: &[f64],
    num_samples: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    let p = d.len();
    if p == 0 || n < p {
        return Err(Error::Domain(format!("need 1 <= p <= n, got n={n}, p={p}")));
    }
    if num_samples < 1000 {
        return Err(Error::InsufficientSamples { needed: 1000, got: num_samples });
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite concentration".into()));
    }
    // Welford accumulation
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..num_samples {
        let x = haar_sample(n, p, rng);
        let s: f64 = (0..p).map(|j| d[j] * x.matrix()[(j, j)]).sum();
        let v = s.exp();
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (num_samples - 1) as f64;
    Ok(MonteCarloEstimate { estimate: mean, std_error: (var / num_samples as f64).sqrt() })
}
