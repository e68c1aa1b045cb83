//! External clustering indices: purity, NMI, Rand, adjusted Rand, Jaccard
//! and the pair-level F-measure.
//!
//! Degenerate conventions: when a ratio is 0/0 (no pairs of the relevant
//! kind), the index is 1 — the two partitions cannot disagree there.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pair counts over the `N(N-1)/2` unordered pairs of points.
///
/// "Positive" means the prediction puts the pair together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Contingency table `n_ij = |A_i ∩ B_j|` (truth rows, prediction columns).
#[derive(Clone, Debug)]
pub struct Contingency {
    pub table: Vec<Vec<u64>>,
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub n: u64,
}

fn index_labels<T: Hash + Eq>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut ids: HashMap<&T, usize> = HashMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    (idx, ids.len())
}

pub fn contingency<T: Hash + Eq, U: Hash + Eq>(truth: &[T], pred: &[U]) -> Result<Contingency> {
    if truth.len() != pred.len() {
        return Err(Error::Shape { expected: format!("{} labels", truth.len()), got: format!("{}", pred.len()) });
    }
    if truth.is_empty() {
        return Err(Error::Domain("empty partition".into()));
    }
    let (a, ka) = index_labels(truth);
    let (b, kb) = index_labels(pred);
    let mut table = vec![vec![0u64; kb]; ka];
    for (i, j) in a.into_iter().zip(b) {
        table[i][j] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency { table, rows, cols, n: truth.len() as u64 })
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// `Σ_k max_c |B_k ∩ A_c| / N`.
pub fn purity<T: Hash + Eq, U: Hash + Eq>(truth: &[T], pred: &[U]) -> Result<f64> {
    let c = contingency(truth, pred)?;
    let hits: u64 = (0..c.cols.len()).map(|j| c.table.iter().map(|r| r[j]).max().unwrap_or(0)).sum();
    Ok(hits as f64 / c.n as f64)
}

/// `I(A;B) / ((H(A) + H(B)) / 2)`.
pub fn nmi<T: Hash + Eq, U: Hash + Eq>(truth: &[T], pred: &[U]) -> Result<f64> {
    let c = contingency(truth, pred)?;
    let n = c.n as f64;
    let entropy = |counts: &[u64]| -> f64 {
        counts.iter().filter(|&&k| k > 0).map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        }).sum()
    };
    let (ha, hb) = (entropy(&c.rows), entropy(&c.cols));
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            if k > 0 {
                let k = k as f64;
                mi += k / n * (n * k / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    let denom = 0.5 * (ha + hb);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

pub fn pair_counts<T: Hash + Eq, U: Hash + Eq>(truth: &[T], pred: &[U]) -> Result<PairCounts> {
    let c = contingency(truth, pred)?;
    if c.n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: c.n as usize });
    }
    Ok(counts_from_table(&c))
}

fn counts_from_table(c: &Contingency) -> PairCounts {
    let tp: u64 = c.table.iter().flatten().map(|&k| choose2(k)).sum();
    let same_truth: u64 = c.rows.iter().map(|&k| choose2(k)).sum();
    let same_pred: u64 = c.cols.iter().map(|&k| choose2(k)).sum();
    let total = choose2(c.n);
    let fp = same_pred - tp;
    let fn_ = same_truth - tp;
    PairCounts { tp, fp, fn_, tn: total - tp - fp - fn_ }
}

/// `(TP + TN) / C(N, 2)`.
pub fn rand_index(pc: &PairCounts) -> f64 {
    (pc.tp + pc.tn) as f64 / pc.total() as f64
}

/// `TP / (TP + FP + FN)`.
pub fn jaccard(pc: &PairCounts) -> f64 {
    let den = pc.tp + pc.fp + pc.fn_;
    if den == 0 {
        return 1.0;
    }
    pc.tp as f64 / den as f64
}

/// `(1+β²) TP / ((1+β²) TP + β² FN + FP)`; `β = 0` is the precision.
pub fn f_beta(pc: &PairCounts, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be nonnegative, got {beta}")));
    }
    let b2 = beta * beta;
    let num = (1.0 + b2) * pc.tp as f64;
    let den = num + b2 * pc.fn_ as f64 + pc.fp as f64;
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok(num / den)
}

/// Adjusted Rand index under the permutation model, evaluated as one exact
/// integer ratio `2 (T·S - A·B) / (T (A + B) - 2 A·B)` with
/// `S = Σ C(n_ij,2)`, `A = Σ C(a_i,2)`, `B = Σ C(b_j,2)`, `T = C(N,2)`.
pub fn ari(pc: &PairCounts) -> f64 {
    let t = pc.total() as i128;
    let s = pc.tp as i128;
    let a = (pc.tp + pc.fn_) as i128;
    let b = (pc.tp + pc.fp) as i128;
    let num = 2 * (t * s - a * b);
    let den = t * (a + b) - 2 * a * b;
    if den == 0 {
        return 1.0;
    }
    num as f64 / den as f64
}

/// One row of the evaluation table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub pur: f64,
    pub ri: f64,
    pub ari: f64,
    pub ji: f64,
    pub nmi: f64,
    pub f05: f64,
    pub f1: f64,
    pub f2: f64,
    pub f5: f64,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 9] = ["PUR", "RI", "ARI", "JI", "NMI", "F05", "F1", "F2", "F5"];

    pub fn values(&self) -> [f64; 9] {
        [self.pur, self.ri, self.ari, self.ji, self.nmi, self.f05, self.f1, self.f2, self.f5]
    }
}

pub fn evaluate<T: Hash + Eq, U: Hash + Eq>(truth: &[T], pred: &[U]) -> Result<MetricsRow> {
    let pc = pair_counts(truth, pred)?;
    Ok(MetricsRow {
        pur: purity(truth, pred)?,
        ri: rand_index(&pc),
        ari: ari(&pc),
        ji: jaccard(&pc),
        nmi: nmi(truth, pred)?,
        f05: f_beta(&pc, 0.5)?,
        f1: f_beta(&pc, 1.0)?,
        f2: f_beta(&pc, 2.0)?,
        f5: f_beta(&pc, 5.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let truth = ['a', 'a', 'b', 'b'];
        assert_eq!(purity(&truth, &[1, 2, 1, 2]).unwrap(), 0.5);
        assert_eq!(purity(&truth, &[1, 2, 3, 4]).unwrap(), 1.0);
        let pc = pair_counts(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
        assert_eq!(ari(&pc), -0.5);
        assert_eq!(rand_index(&pc), 1.0 / 3.0);
        assert_eq!(jaccard(&pc), 0.0);
        assert_eq!(nmi(&truth, &[7, 7, 7, 7]).unwrap(), 0.0);
    }

    #[test]
    fn identical_partitions() {
        let a = [0, 0, 1, 2, 2, 2];
        let r = evaluate(&a, &[5, 5, 3, 9, 9, 9]).unwrap();
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(pair_counts(&[1], &[1]).is_err());
        assert!(purity(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn f0_is_precision() {
        let pc = pair_counts(&[0, 0, 0, 1, 1, 2], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert_eq!(f_beta(&pc, 0.0).unwrap(), pc.tp as f64 / (pc.tp + pc.fp) as f64);
    }
}
