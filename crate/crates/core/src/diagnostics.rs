//! MCMC convergence summaries: autocorrelation and running means.

use crate::mixture::ChainTrace;

/// Sample autocorrelation at lags `0..=max_lag` (biased estimator,
/// normalized by the lag-0 autocovariance). A constant series gives 1 at
/// lag 0 and 0 elsewhere.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (0..=max_lag.min(n - 1))
        .map(|k| {
            if c0 == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            let ck: f64 = (0..n - k).map(|i| (x[i] - mean) * (x[i + k] - mean)).sum();
            ck / c0
        })
        .collect()
}

pub fn cumulative_mean(x: &[f64]) -> Vec<f64> {
    let mut s = 0.0;
    x.iter().enumerate().map(|(i, v)| {
        s += v;
        s / (i + 1) as f64
    }).collect()
}

/// Named scalar series of a trace: deviance, every `π_c` and every entry
/// of every `F_c` (row-major), after label alignment.
pub fn trace_series(trace: &ChainTrace) -> Vec<(String, Vec<f64>)> {
    let mut t = trace.clone();
    crate::mixture::align_trace(&mut t);
    let mut out = vec![("deviance".to_string(), t.deviances())];
    for c in 0..t.c {
        out.push((format!("pi_{}", c + 1), t.records.iter().map(|r| r.pi[c]).collect()));
    }
    for c in 0..t.c {
        for i in 0..t.n {
            for j in 0..t.p {
                out.push((
                    format!("F{}_{}{}", c + 1, i + 1, j + 1),
                    t.records.iter().map(|r| r.f[c][(i, j)]).collect(),
                ));
            }
        }
    }
    out
}
