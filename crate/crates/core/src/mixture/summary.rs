use nalgebra::DMatrix;

use super::hungarian::min_cost_assignment;
use super::ChainTrace;

/// Co-occurrence matrices are only formed up to this many points.
pub const CO_OCCURRENCE_MAX: usize = 10_000;

#[derive(Clone, Debug)]
pub struct PosteriorSummary {
    /// Posterior mean of each aligned `F_c`.
    pub f_hat: Vec<DMatrix<f64>>,
    pub pi_hat: Vec<f64>,
    /// Most frequent aligned label of each point (needs stored `z`).
    pub modal_labels: Option<Vec<usize>>,
    /// Fraction of kept sweeps with `z_i = z_j` (needs stored `z`).
    pub co_occurrence: Option<DMatrix<f64>>,
}

/// Relabels every record so that its components match those of the first
/// record: a minimum-cost assignment on `||F_a - F_b||_F`.
pub fn align_trace(trace: &mut ChainTrace) {
    let Some(first) = trace.records.first() else { return };
    let reference = first.f.clone();
    for rec in trace.records.iter_mut().skip(1) {
        let cost: Vec<Vec<f64>> =
            reference.iter().map(|r| rec.f.iter().map(|f| (r - f).norm()).collect()).collect();
        // perm[ref] = current label
        let perm = min_cost_assignment(&cost);
        if perm.iter().enumerate().all(|(i, &j)| i == j) {
            continue;
        }
        rec.f = perm.iter().map(|&j| rec.f[j].clone()).collect();
        rec.pi = perm.iter().map(|&j| rec.pi[j]).collect();
        if let Some(z) = rec.z.as_mut() {
            let mut inv = vec![0; perm.len()];
            for (i, &j) in perm.iter().enumerate() {
                inv[j] = i;
            }
            for zi in z.iter_mut() {
                *zi = inv[*zi];
            }
        }
    }
}

/// Aligns the trace, then averages `F` and `π` and tallies labels.
pub fn posterior_summary(trace: &ChainTrace) -> PosteriorSummary {
    let mut t = trace.clone();
    align_trace(&mut t);
    let s = t.records.len().max(1) as f64;
    let mut f_hat = vec![DMatrix::<f64>::zeros(t.n, t.p); t.c];
    let mut pi_hat = vec![0.0; t.c];
    for rec in &t.records {
        for k in 0..t.c {
            f_hat[k] += &rec.f[k];
            pi_hat[k] += rec.pi[k];
        }
    }
    for f in f_hat.iter_mut() {
        *f /= s;
    }
    for x in pi_hat.iter_mut() {
        *x /= s;
    }

    let zs: Option<Vec<&Vec<usize>>> = t.records.iter().map(|r| r.z.as_ref()).collect();
    let zs = zs.filter(|z| !z.is_empty());
    let modal_labels = zs.as_ref().map(|zs| {
        let n_obs = zs[0].len();
        let mut counts = vec![0u32; n_obs * t.c];
        for z in zs {
            for (i, &k) in z.iter().enumerate() {
                counts[i * t.c + k] += 1;
            }
        }
        (0..n_obs)
            .map(|i| {
                let row = &counts[i * t.c..(i + 1) * t.c];
                // first maximum on ties
                (0..t.c).fold(0, |b, k| if row[k] > row[b] { k } else { b })
            })
            .collect()
    });
    let co_occurrence = zs.as_ref().filter(|zs| zs[0].len() <= CO_OCCURRENCE_MAX).map(|zs| {
        let n_obs = zs[0].len();
        let mut m = DMatrix::<f64>::zeros(n_obs, n_obs);
        for z in zs {
            for i in 0..n_obs {
                for j in i..n_obs {
                    if z[i] == z[j] {
                        m[(i, j)] += 1.0;
                    }
                }
            }
        }
        for i in 0..n_obs {
            for j in i..n_obs {
                let v = m[(i, j)] / zs.len() as f64;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    });
    PosteriorSummary { f_hat, pi_hat, modal_labels, co_occurrence }
}
