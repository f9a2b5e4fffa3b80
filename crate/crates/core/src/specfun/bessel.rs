//! Bessel functions of the first kind, real order `a > -1`, argument `t >= 0`.
//!
//! Power series below `SERIES_LIMIT`, Miller backward recurrence above it,
//! normalized through the Neumann sum `(t/2)^nu = sum_j c_j J_{nu+2j}(t)`.

use statrs::function::gamma::{gamma, ln_gamma};

use super::FunctionValue;
use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 12.0;

fn check(a: f64, t: f64) -> Result<()> {
    if !(a.is_finite() && a > -1.0) {
        return Err(Error::Parameter(format!("Bessel order must exceed -1, got {a}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Series value with a cancellation-based error estimate.
fn series(a: f64, t: f64) -> FunctionValue {
    if t == 0.0 {
        let v = if a == 0.0 { 1.0 } else { 0.0 };
        return FunctionValue::exact(v);
    }
    let q = -0.25 * t * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut abs_sum = 1.0;
    for m in 1..500 {
        let mf = m as f64;
        term *= q / (mf * (a + mf));
        sum += term;
        abs_sum += term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    let pre = (a * (0.5 * t).ln() - ln_gamma(a + 1.0)).exp();
    let value = pre * sum;
    let err = pre * abs_sum * 4.0 * f64::EPSILON + value.abs() * 4.0 * f64::EPSILON;
    FunctionValue::new(value, err)
}

/// `(J_a(t), J_{a+1}(t))` by Miller's algorithm; needs `t > 0` and `a > -1`.
pub(super) fn miller(a: f64, t: f64) -> (f64, f64) {
    let (n, nu) = if a < 0.0 {
        (0, a)
    } else {
        (a.floor() as usize, a - a.floor())
    };
    let mut m = n + (1.3 * t).ceil() as usize + 60;
    if m % 2 == 1 {
        m += 1;
    }
    // Neumann coefficients c_j, j = 0..=m/2
    let half = m / 2;
    let mut c = vec![0.0; half + 1];
    if nu == 0.0 {
        c[0] = 1.0;
        for cj in c.iter_mut().skip(1) {
            *cj = 2.0;
        }
    } else {
        let g = gamma(nu + 1.0);
        c[0] = g;
        let mut h = g;
        for j in 1..=half {
            let jf = j as f64;
            if j > 1 {
                h *= (nu + jf - 1.0) / jf;
            }
            c[j] = (nu + 2.0 * jf) * h;
        }
    }

    let mut jp1 = 0.0;
    let mut j = 1e-30;
    let mut norm = if m.is_multiple_of(2) { c[half] * j } else { 0.0 };
    let mut at_n = if m == n { j } else { 0.0 };
    let mut at_n1 = if m == n + 1 { j } else { 0.0 };
    for k in (1..=m).rev() {
        let jm1 = 2.0 * (nu + k as f64) / t * j - jp1;
        jp1 = j;
        j = jm1;
        let order = k - 1;
        if order == n {
            at_n = j;
        }
        if order == n + 1 {
            at_n1 = j;
        }
        if order % 2 == 0 {
            norm += c[order / 2] * j;
        }
        if j.abs() > 1e250 {
            let s = 1e-250;
            j *= s;
            jp1 *= s;
            norm *= s;
            at_n *= s;
            at_n1 *= s;
        }
    }
    let factor = (nu * (0.5 * t).ln()).exp() / norm;
    (at_n * factor, at_n1 * factor)
}

/// `J_a(t)` with an error estimate.
pub fn bessel_j_value(a: f64, t: f64) -> Result<FunctionValue> {
    check(a, t)?;
    if t < SERIES_LIMIT {
        Ok(series(a, t))
    } else {
        let (v, _) = miller(a, t);
        Ok(FunctionValue::new(v, 64.0 * f64::EPSILON * (1.0 + t)))
    }
}

pub fn bessel_j(a: f64, t: f64) -> Result<f64> {
    Ok(bessel_j_value(a, t)?.value)
}

/// `(J_a(t), J_{a+1}(t))`.
pub fn bessel_j_pair(a: f64, t: f64) -> Result<(f64, f64)> {
    check(a, t)?;
    if t < SERIES_LIMIT {
        Ok((series(a, t).value, series(a + 1.0, t).value))
    } else {
        Ok(miller(a, t))
    }
}

/// `J_a'(t) = (a/t) J_a(t) - J_{a+1}(t)`, with the `t = 0` limit.
pub fn bessel_j_prime(a: f64, t: f64) -> Result<f64> {
    check(a, t)?;
    if t == 0.0 {
        return Ok(if a == 1.0 {
            0.5
        } else if a == 0.0 || a > 1.0 {
            0.0
        } else {
            return Err(Error::Domain(format!("J_{a}' is singular at 0")));
        });
    }
    let (ja, ja1) = bessel_j_pair(a, t)?;
    Ok(a / t * ja - ja1)
}
