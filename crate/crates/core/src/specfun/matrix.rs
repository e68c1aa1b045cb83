//! `0F1(a; D^2/4)` for a diagonal `D` of size 1 or 2, with gradient and
//! Hessian of its logarithm.
//!
//! For `p = 2` the function is expanded as (Muirhead)
//!
//! ```text
//! R(d1, d2) = sum_k c_k 0F1(a + 2k; (d1^2 + d2^2) / 4),
//! c_k = (d1^2 d2^2 / 16)^k / ((a - 1/2)_k (a)_{2k} k!)
//! ```
//!
//! and every derivative is a similar positive series using `0F1` at
//! orders `a + 2k`, `a + 2k + 1`, `a + 2k + 2`, all obtained from one
//! ladder evaluation.

use super::scalar::{ladder_into, log_hyp0f1, ratio_ladder};
use crate::error::{Error, Result};

/// Hard cap on the number of outer series terms (reached near `d ≈ 5e4`).
pub const MAX_TERMS: usize = 20_000;
/// Ladders up to this many outer terms live on the stack.
const STACK_TERMS: usize = 500;

/// Log-value, gradient and Hessian of `log 0F1(n/2; D^2/4)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyp0F1Eval {
    /// Number of concentrations (1 or 2).
    pub p: usize,
    /// `log 0F1`.
    pub log_value: f64,
    /// `h_j(d) = (d/dd_j 0F1) / 0F1`; only the first `p` entries are used.
    pub grad: [f64; 2],
    /// Hessian of `log 0F1`; only the leading `p x p` block is used.
    pub hess: [[f64; 2]; 2],
}

impl Hyp0F1Eval {
    /// Gradient as a slice of length `p`.
    pub fn grad(&self) -> &[f64] {
        &self.grad[..self.p]
    }
}

fn check_matrix_args(a: f64, d: &[f64], min_a: f64) -> Result<()> {
    if !(a > min_a) || !a.is_finite() {
        return Err(Error::Domain(format!("0F1 matrix parameter must exceed {min_a}, got {a}")));
    }
    if d.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!("concentrations must be finite and nonnegative, got {d:?}")));
    }
    Ok(())
}

fn scratch<'a>(stack: &'a mut [f64], heap: &'a mut Vec<f64>, len: usize) -> &'a mut [f64] {
    if len <= stack.len() {
        &mut stack[..len]
    } else {
        heap.resize(len, 0.0);
        &mut heap[..]
    }
}

/// Number of outer terms `K + 1` needed so that the neglected tail of the
/// coefficient series, weighted by `(2k + 2)^weight_pow`, is below `tol`
/// relative to the kept part.
///
/// Because `0F1(b; y)` decreases in `b`, the relative tail of any of the
/// series above is bounded by the relative tail of its coefficients. The
/// coefficient ratios `r_k` decrease in `k`, so once the weighted ratio is
/// below one the tail is dominated by a geometric series.
fn outer_terms(a: f64, q: f64, tol: f64, weight_pow: i32) -> Result<usize> {
    if q == 0.0 {
        return Ok(1);
    }
    let w = |k: f64| (2.0 * k + 2.0).powi(weight_pow);
    let mut c = 1.0;
    let mut sum = w(0.0);
    let mut log_scale = 0.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let r = q / ((a - 0.5 + kf) * (a + 2.0 * kf) * (a + 2.0 * kf + 1.0) * (kf + 1.0));
        let c_next = c * r;
        let eff = r * (w(kf + 2.0) / w(kf + 1.0));
        if eff < 0.9 && c_next * w(kf + 1.0) / (1.0 - eff) < tol * sum {
            return Ok(k + 1);
        }
        c = c_next;
        sum += c * w(kf + 1.0);
        if sum > 1e250 {
            c *= 1e-250;
            sum *= 1e-250;
            log_scale += 250.0 * std::f64::consts::LN_10;
        }
    }
    Err(Error::Convergence { terms: MAX_TERMS, partial_log: sum.ln() + log_scale })
}

/// `e * ln(d)` with `0 * ln 0 = 0`.
#[inline]
fn xlog(e: f64, ld: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * ld
    }
}

/// Accumulates positive terms given by their logarithms.
struct LogSum {
    max: f64,
    terms: Vec<f64>,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, terms: Vec::new() }
    }
    #[inline]
    fn push(&mut self, lt: f64) {
        if lt > self.max {
            self.max = lt;
        }
        self.terms.push(lt);
    }
    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.max + self.terms.iter().map(|t| (t - self.max).exp()).sum::<f64>().ln()
    }
}

/// Below this value of `d1 + d2` terms are summed directly.
const LINEAR_SUM_MAX: f64 = 50.0;

/// `log 0F1(a; diag(d1, d2)^2 / 4)`.
///
/// ```
/// use stiefelmix::specfun::{log_hyp0f1, log_hyp0f1_matrix2};
/// let m = log_hyp0f1_matrix2(1.5, [3.0, 0.0], 1e-12).unwrap();
/// let s = log_hyp0f1(1.5, 9.0 / 4.0, 1e-12).unwrap();
/// assert!((m - s).abs() < 1e-12);
/// ```
pub fn log_hyp0f1_matrix2(a: f64, d: [f64; 2], tol: f64) -> Result<f64> {
    check_matrix_args(a, &d, 0.5)?;
    let y1 = 0.25 * d[0] * d[0];
    let y2 = 0.25 * d[1] * d[1];
    let y = y1 + y2;
    let q = y1 * y2;
    if q == 0.0 {
        return log_hyp0f1(a, y, tol);
    }
    let terms = outer_terms(a, q, tol, 0)?;
    let mut stack = [0.0; 2 * STACK_TERMS + 5];
    let mut heap = Vec::new();
    let buf = scratch(&mut stack, &mut heap, 2 * terms - 1);
    if d[0] + d[1] <= LINEAR_SUM_MAX {
        // c_k <= R <= e^50 and ratios <= 1: plain arithmetic is safe
        let log_fa = ratio_ladder(a, y, buf);
        let mut c = 1.0;
        let mut s = 0.0;
        for k in 0..terms {
            s += c * buf[2 * k];
            let kf = k as f64;
            c *= q / ((a - 0.5 + kf) * (a + 2.0 * kf) * (a + 2.0 * kf + 1.0) * (kf + 1.0));
        }
        return Ok(log_fa + s.ln());
    }
    ladder_into(a, y, buf);
    let lq = q.ln();
    let mut log_c = 0.0;
    let mut acc = LogSum::new();
    for k in 0..terms {
        acc.push(log_c + buf[2 * k]);
        let kf = k as f64;
        log_c += lq - ((a - 0.5 + kf) * (a + 2.0 * kf) * (a + 2.0 * kf + 1.0) * (kf + 1.0)).ln();
    }
    Ok(acc.value())
}

/// Log-value, gradient `h(d)` and Hessian of `log 0F1(a; diag(d1, d2)^2/4)`.
///
/// Zero concentrations are handled through the analytic limit of the
/// `c_k / d_j` terms.
pub fn hyp0f1_partials2(a: f64, d: [f64; 2], tol: f64) -> Result<Hyp0F1Eval> {
    check_matrix_args(a, &d, 0.5)?;
    let (d1, d2) = (d[0], d[1]);
    let y = 0.25 * (d1 * d1 + d2 * d2);
    let q = 0.25 * d1 * d1 * 0.25 * d2 * d2;
    // tighter tolerance and polynomial weights: the derivative series carry
    // factors up to k^2 / d^2 relative to the value series
    let terms = if q == 0.0 { 2 } else { outer_terms(a, q, tol * 1e-2, 2)? + 2 };
    let mut stack = [0.0; 2 * STACK_TERMS + 5];
    let mut heap = Vec::new();
    let ladder = scratch(&mut stack, &mut heap, 2 * terms + 1);
    if q > 0.0 && d1 + d2 <= LINEAR_SUM_MAX {
        return Ok(partials2_linear(a, d1, d2, q, y, terms, ladder));
    }
    ladder_into(a, y, ladder);

    let l1 = d1.ln();
    let l2 = d2.ln();
    let ln16 = 16f64.ln();
    let mut r = LogSum::new();
    let mut r1 = LogSum::new();
    let mut r2 = LogSum::new();
    let mut r11 = LogSum::new();
    let mut r22 = LogSum::new();
    let mut r12 = LogSum::new();
    // log A_k = -log((a-1/2)_k (a)_{2k} k!)
    let mut log_a = 0.0;
    for k in 0..terms {
        let kf = k as f64;
        let b = a + 2.0 * kf;
        let base = log_a - kf * ln16;
        let (f0, f1, f2) = (ladder[2 * k], ladder[2 * k + 1], ladder[2 * k + 2]);
        let e = 2.0 * kf;
        let lb = b.ln();
        let lbb = (4.0 * b * (b + 1.0)).ln();
        r.push(base + xlog(e, l1) + xlog(e, l2) + f0);

        r1.push(base + xlog(e + 1.0, l1) + xlog(e, l2) - (2.0 * b).ln() + f1);
        r2.push(base + xlog(e, l1) + xlog(e + 1.0, l2) - (2.0 * b).ln() + f1);
        r11.push(base + xlog(e, l1) + xlog(e, l2) + ((4.0 * kf + 1.0) / (2.0 * b)).ln() + f1);
        r11.push(base + xlog(e + 2.0, l1) + xlog(e, l2) - lbb + f2);
        r22.push(base + xlog(e, l1) + xlog(e, l2) + ((4.0 * kf + 1.0) / (2.0 * b)).ln() + f1);
        r22.push(base + xlog(e, l1) + xlog(e + 2.0, l2) - lbb + f2);
        r12.push(base + xlog(e + 1.0, l1) + xlog(e + 1.0, l2) - lbb + f2);
        if k >= 1 {
            let lk2 = (2.0 * kf).ln();
            r1.push(base + lk2 + xlog(e - 1.0, l1) + xlog(e, l2) + f0);
            r2.push(base + lk2 + xlog(e, l1) + xlog(e - 1.0, l2) + f0);
            let lkk = (2.0 * kf * (2.0 * kf - 1.0)).ln();
            r11.push(base + lkk + xlog(e - 2.0, l1) + xlog(e, l2) + f0);
            r22.push(base + lkk + xlog(e, l1) + xlog(e - 2.0, l2) + f0);
            r12.push(base + (4.0 * kf * kf).ln() + xlog(e - 1.0, l1) + xlog(e - 1.0, l2) + f0);
            r12.push(base + kf.ln() - lb + xlog(e + 1.0, l1) + xlog(e - 1.0, l2) + f1);
            r12.push(base + kf.ln() - lb + xlog(e - 1.0, l1) + xlog(e + 1.0, l2) + f1);
        }
        log_a -= ((a - 0.5 + kf) * b * (b + 1.0) * (kf + 1.0)).ln();
    }
    let lr = r.value();
    let h1 = (r1.value() - lr).exp();
    let h2 = (r2.value() - lr).exp();
    let h11 = (r11.value() - lr).exp() - h1 * h1;
    let h22 = (r22.value() - lr).exp() - h2 * h2;
    let h12 = (r12.value() - lr).exp() - h1 * h2;
    Ok(Hyp0F1Eval { p: 2, log_value: lr, grad: [h1, h2], hess: [[h11, h12], [h12, h22]] })
}

fn partials2_linear(a: f64, d1: f64, d2: f64, q: f64, y: f64, terms: usize, g: &mut [f64]) -> Hyp0F1Eval {
    let log_fa = ratio_ladder(a, y, g);
    let (mut r, mut r1, mut r2, mut r11, mut r22, mut r12) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut c = 1.0;
    let (i1, i2) = (1.0 / d1, 1.0 / d2);
    let cross = d1 * i2 + d2 * i1;
    for k in 0..terms {
        let kf = k as f64;
        let b = a + 2.0 * kf;
        let (g0, g1, g2) = (c * g[2 * k], c * g[2 * k + 1], c * g[2 * k + 2]);
        let k2 = 2.0 * kf;
        let half_b = 0.5 / b;
        let quad = 0.25 / (b * (b + 1.0));
        r += g0;
        r1 += k2 * i1 * g0 + d1 * half_b * g1;
        r2 += k2 * i2 * g0 + d2 * half_b * g1;
        let mid = (4.0 * kf + 1.0) * half_b * g1;
        r11 += k2 * (k2 - 1.0) * i1 * i1 * g0 + mid + d1 * d1 * quad * g2;
        r22 += k2 * (k2 - 1.0) * i2 * i2 * g0 + mid + d2 * d2 * quad * g2;
        r12 += k2 * k2 * i1 * i2 * g0 + kf * cross / b * g1 + d1 * d2 * quad * g2;
        c *= q / ((a - 0.5 + kf) * b * (b + 1.0) * (kf + 1.0));
    }
    let (h1, h2) = (r1 / r, r2 / r);
    let h11 = r11 / r - h1 * h1;
    let h22 = r22 / r - h2 * h2;
    let h12 = r12 / r - h1 * h2;
    Hyp0F1Eval { p: 2, log_value: log_fa + r.ln(), grad: [h1, h2], hess: [[h11, h12], [h12, h22]] }
}

/// Log-value and derivatives of `log 0F1(a; d^2/4)` in the scalar case.
pub fn hyp0f1_partials1(a: f64, d: f64, tol: f64) -> Result<Hyp0F1Eval> {
    check_matrix_args(a, &[d], 0.0)?;
    let y = 0.25 * d * d;
    let mut l = [0.0; 3];
    if y <= 25.0 {
        for (j, v) in l.iter_mut().enumerate() {
            *v = super::scalar::log_hyp0f1_series(a + j as f64, y, tol * 1e-2);
        }
    } else {
        ladder_into(a, y, &mut l);
    }
    let ratio1 = (l[1] - l[0]).exp();
    let ratio2 = (l[2] - l[0]).exp();
    let h = d / (2.0 * a) * ratio1;
    let second = ratio1 / (2.0 * a) + d * d / (4.0 * a * (a + 1.0)) * ratio2;
    Ok(Hyp0F1Eval {
        p: 1,
        log_value: l[0],
        grad: [h, 0.0],
        hess: [[second - h * h, 0.0], [0.0, 0.0]],
    })
}

/// `log 0F1(n/2; D^2/4)` for `p = d.len()` in `{1, 2}`.
pub fn log_norm_const(n: usize, d: &[f64], tol: f64) -> Result<f64> {
    let a = 0.5 * n as f64;
    match d.len() {
        1 => {
            check_matrix_args(a, d, 0.0)?;
            log_hyp0f1(a, 0.25 * d[0] * d[0], tol)
        }
        2 => log_hyp0f1_matrix2(a, [d[0], d[1]], tol),
        p => Err(Error::UnsupportedDimension(p)),
    }
}

/// Gradient and Hessian of `log 0F1(n/2; D^2/4)` for `p` in `{1, 2}`.
pub fn norm_const_partials(n: usize, d: &[f64], tol: f64) -> Result<Hyp0F1Eval> {
    let a = 0.5 * n as f64;
    match d.len() {
        1 => hyp0f1_partials1(a, d[0], tol),
        2 => hyp0f1_partials2(a, [d[0], d[1]], tol),
        p => Err(Error::UnsupportedDimension(p)),
    }
}
