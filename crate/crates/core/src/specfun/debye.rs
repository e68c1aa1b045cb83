//! Debye's uniform asymptotic expansion of the modified Bessel function,
//! rewritten directly for `log 0F1(nu + 1; x^2 / 4)` so that the large
//! `lgamma` and `nu * ln(..)` pieces cancel analytically instead of in
//! floating point.

use std::sync::OnceLock;

/// Smallest order at which the expansion is used as an anchor.
pub(crate) const NU_MIN: f64 = 25.0;

/// Number of `U_k` polynomials generated (`U_0 ..= U_{N_TERMS-1}`).
const N_TERMS: usize = 13;

/// Coefficients of `U_k(t)` in increasing powers of `t`.
fn polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
        for _ in 1..N_TERMS {
            let u = out.last().expect("non-empty");
            // 1/2 t^2 (1 - t^2) U'(t)
            let mut next = vec![0.0; u.len() + 3];
            for (i, &c) in u.iter().enumerate().skip(1) {
                let dc = c * i as f64;
                next[i + 1] += 0.5 * dc;
                next[i + 3] -= 0.5 * dc;
            }
            // 1/8 int_0^t (1 - 5 tau^2) U(tau) dtau
            for (i, &c) in u.iter().enumerate() {
                next[i + 1] += 0.125 * c / (i + 1) as f64;
                next[i + 3] -= 0.625 * c / (i + 3) as f64;
            }
            while next.last() == Some(&0.0) {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// `ln Gamma(nu + 1) - [(nu + 1/2) ln nu - nu + ln(2 pi) / 2]`.
fn stirling_tail(nu: f64) -> f64 {
    let r = 1.0 / nu;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0
                - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0 - r2 * (691.0 / 360_360.0))))))
}

/// `log 0F1(nu + 1; y)` for `nu >= NU_MIN`, `y >= 0`.
pub(crate) fn log_hyp0f1_debye(nu: f64, y: f64) -> f64 {
    debug_assert!(nu >= NU_MIN - 1e-9);
    let x2 = 4.0 * y;
    let s = (nu * nu + x2).sqrt();
    let s_minus_nu = x2 / (s + nu);
    let t = nu / s;
    let mut series = 0.0;
    let mut scale = 1.0;
    for u in polys() {
        let term = horner(u, t) * scale;
        series += term;
        if term.abs() < 1e-18 * series.abs() {
            break;
        }
        scale /= nu;
    }
    s_minus_nu - nu * (s_minus_nu / (2.0 * nu)).ln_1p()
        + 0.5 * t.ln()
        + stirling_tail(nu)
        + series.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_polynomials() {
        let p = polys();
        let u1 = [0.0, 3.0 / 24.0, 0.0, -5.0 / 24.0];
        for (a, b) in p[1].iter().zip(u1) {
            assert!((a - b).abs() < 1e-15);
        }
        // U_2 = (81 t^2 - 462 t^4 + 385 t^6) / 1152
        let u2 = [0.0, 0.0, 81.0, 0.0, -462.0, 0.0, 385.0];
        for (a, b) in p[2].iter().zip(u2) {
            assert!((a - b / 1152.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_argument_is_one() {
        for nu in [25.0, 30.5, 100.0, 1000.0] {
            assert!(log_hyp0f1_debye(nu, 0.0).abs() < 1e-15);
        }
    }
}
