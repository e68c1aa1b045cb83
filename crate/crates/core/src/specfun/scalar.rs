//! Scalar-argument `0F1(b; y)`.
//!
//! Two evaluation routes:
//! - the power series `sum y^k / ((b)_k k!)`, used for small `y`;
//! - a *ladder*: anchor `log 0F1` at a high order with the Debye expansion
//!   and walk down with the contiguous relation
//!   `0F1(b-1) = 0F1(b) + y / (b (b-1)) 0F1(b+1)`, which is stable in the
//!   downward direction (`0F1` is the minimal solution going up).
//!
//! The ladder yields every `0F1(a + j; y)`, `j = 0..count`, in one pass;
//! the matrix-argument series needs exactly that family.

use super::debye::{log_hyp0f1_debye, NU_MIN};
use crate::error::{Error, Result};

/// Largest `y` for which the direct series is used by [`log_hyp0f1`].
const SERIES_MAX_Y: f64 = 25.0;

/// Direct power series of `log 0F1(b; y)`; terms are added until the next
/// one is below `tol` relative to the running sum.
pub fn log_hyp0f1_series(b: f64, y: f64, tol: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = 0.0;
    loop {
        term *= y / ((b + k) * (k + 1.0));
        sum += term;
        k += 1.0;
        // once the term ratio is below 1/2 the tail is bounded by the term
        if term <= tol * sum && y / ((b + k) * (k + 1.0)) < 0.5 {
            break;
        }
        if !sum.is_finite() {
            break;
        }
    }
    sum.ln()
}

/// `log 0F1(a; y)` with relative error of the value at most about `tol`
/// (floor ~1e-14 on the asymptotic route).
///
/// ```
/// use stiefelmix::specfun::log_hyp0f1;
/// // 0F1(1/2; z) = cosh(2 sqrt z)
/// let v = log_hyp0f1(0.5, 1.0, 1e-12).unwrap();
/// assert!((v - 2f64.cosh().ln()).abs() < 1e-13);
/// ```
pub fn log_hyp0f1(a: f64, y: f64, tol: f64) -> Result<f64> {
    check_args(a, y)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y <= SERIES_MAX_Y {
        return Ok(log_hyp0f1_series(a, y, tol));
    }
    let mut out = [0.0];
    ladder_into(a, y, &mut out);
    Ok(out[0])
}

fn check_args(a: f64, y: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("0F1 parameter must be positive, got {a}")));
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("0F1 argument must be nonnegative, got {y}")));
    }
    Ok(())
}

/// `out[j] = log 0F1(a + j; y)` for `j = 0..out.len()`.
pub(crate) fn ladder_into(a: f64, y: f64, out: &mut [f64]) {
    let count = out.len();
    if count == 0 {
        return;
    }
    if y == 0.0 {
        out.fill(0.0);
        return;
    }
    let top = a + (count - 1) as f64;
    let extra = if top - 1.0 < NU_MIN { (NU_MIN + 1.0 - top).ceil() as usize } else { 0 };
    let anchor = top + extra as f64;

    let log_f = log_hyp0f1_debye(anchor - 1.0, y);
    // rho_b = F(b+1)/F(b)
    let mut rho = (log_hyp0f1_debye(anchor, y) - log_f).exp();
    let mut log_cur = log_f;
    let mut b = anchor;
    // Walk down the extension without taking logs at every step.
    let mut prod = 1.0;
    for _ in 0..extra {
        rho = 1.0 / (1.0 + y * rho / (b * (b - 1.0)));
        prod *= rho;
        if prod < 1e-200 {
            log_cur -= prod.ln();
            prod = 1.0;
        }
        b -= 1.0;
    }
    log_cur -= prod.ln();
    out[count - 1] = log_cur;
    for j in (0..count - 1).rev() {
        rho = 1.0 / (1.0 + y * rho / (b * (b - 1.0)));
        log_cur -= rho.ln();
        b -= 1.0;
        out[j] = log_cur;
    }
}

/// `F(b; y)` by direct series in linear arithmetic (`y <= SERIES_MAX_Y`).
fn series_value(b: f64, y: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = 0.0;
    loop {
        term *= y / ((b + k) * (k + 1.0));
        sum += term;
        k += 1.0;
        if term <= 1e-17 * sum && y / ((b + k) * (k + 1.0)) < 0.5 {
            return sum;
        }
    }
}

/// Fills `g[j] = 0F1(a + j; y) / 0F1(a; y)` and returns `log 0F1(a; y)`.
///
/// Intended for moderate `y` (the products in `g` are kept in linear
/// scale; they are bounded by 1 since `0F1` decreases in its parameter).
pub(crate) fn ratio_ladder(a: f64, y: f64, g: &mut [f64]) -> f64 {
    let count = g.len();
    if count == 0 {
        return 0.0;
    }
    if y == 0.0 {
        g.fill(1.0);
        return 0.0;
    }
    let top = a + (count - 1) as f64;
    let (anchor, log_anchor, mut rho) = if y <= SERIES_MAX_Y {
        let f0 = series_value(top, y);
        let f1 = series_value(top + 1.0, y);
        (top, f0.ln(), f1 / f0)
    } else {
        let anchor = if top - 1.0 < NU_MIN { top + (NU_MIN + 1.0 - top).ceil() } else { top };
        let l0 = log_hyp0f1_debye(anchor - 1.0, y);
        let l1 = log_hyp0f1_debye(anchor, y);
        (anchor, l0, (l1 - l0).exp())
    };
    let steps = (anchor - a).round() as usize;
    let mut b = anchor;
    let mut prod = 1.0;
    let mut log_acc = 0.0;
    for s in 0..steps {
        rho = 1.0 / (1.0 + y * rho / (b * (b - 1.0)));
        b -= 1.0;
        let j = steps - 1 - s;
        if j + 1 < count {
            g[j + 1] = rho;
        }
        prod *= rho;
        if prod < 1e-250 {
            log_acc += prod.ln();
            prod = 1.0;
        }
    }
    log_acc += prod.ln();
    g[0] = 1.0;
    for j in 1..count {
        g[j] *= g[j - 1];
    }
    log_anchor - log_acc
}
