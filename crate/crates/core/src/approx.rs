//! Quantitative approximation facts: Hermite functions against cosines,
//! Stirling bounds, the Hermite normalization product and the weighted
//! Laguerre expansion in Bessel functions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::specfun::{bessel_j, hermite_psi, laguerre};

use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualScan {
    pub parameter_values: Vec<usize>,
    pub residuals: Vec<f64>,
    pub scaled_residuals: Vec<f64>,
    pub order: f64,
}

impl ResidualScan {
    fn build(ns: &[usize], residuals: Vec<f64>, order: f64) -> Self {
        let scaled_residuals = ns
            .iter()
            .zip(&residuals)
            .map(|(&n, r)| r * (n as f64).powf(order))
            .collect();
        Self { parameter_values: ns.to_vec(), residuals, scaled_residuals, order }
    }

    pub fn max_scaled(&self) -> f64 {
        self.scaled_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_scaled(&self) -> f64 {
        self.scaled_residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn hermite_cosine(n: usize, index: usize, x: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!("Hermite–cosine comparison needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let lhs = PI.sqrt() * (nf / 2.0).powf(0.25) * hermite_psi(index, x / (2.0 * nf).sqrt())?;
    let rhs = (x - index as f64 * PI / 2.0).cos();
    Ok((lhs - rhs).abs())
}

/// `|pi^{1/2} (n/2)^{1/4} psi_n(x / sqrt(2n)) - cos(x - n pi/2)|`.
pub fn hermite_cosine_residual(n: usize, x: f64) -> Result<f64> {
    hermite_cosine(n, n, x)
}

/// The same comparison for `psi_{n-1}` against `cos(x - (n-1) pi/2)`.
pub fn hermite_cosine_residual_lower(n: usize, x: f64) -> Result<f64> {
    hermite_cosine(n, n - 1, x)
}

/// Residuals at fixed `x` over `ns`, scaled by `n`.
pub fn hermite_cosine_scan(ns: &[usize], x: f64, lower: bool) -> Result<ResidualScan> {
    let f = if lower { hermite_cosine_residual_lower } else { hermite_cosine_residual };
    let r = ns.iter().map(|&n| f(n, x)).collect::<Result<Vec<_>>>()?;
    Ok(ResidualScan::build(ns, r, 1.0))
}

/// Upper envelope `E(x) = max_n n r(n, x)` and a dominating cubic with
/// nonnegative coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicEnvelope {
    pub xs: Vec<f64>,
    pub envelope: Vec<f64>,
    /// `c0 + c1 x + c2 x^2 + c3 x^3`
    pub coefficients: [f64; 4],
}

impl CubicEnvelope {
    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        c[0] + x * (c[1] + x * (c[2] + x * c[3]))
    }

    pub fn sup(&self) -> f64 {
        self.envelope.iter().copied().fold(0.0, f64::max)
    }

    pub fn dominates(&self) -> bool {
        self.xs.iter().zip(&self.envelope).all(|(&x, &e)| e <= self.eval(x) * (1.0 + 1e-12))
    }
}

pub fn hermite_cosine_envelope(ns: &[usize], xs: &[f64], lower: bool) -> Result<CubicEnvelope> {
    let f = if lower { hermite_cosine_residual_lower } else { hermite_cosine_residual };
    let envelope = xs
        .par_iter()
        .map(|&x| {
            ns.iter()
                .map(|&n| f(n, x).map(|r| n as f64 * r))
                .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut c = fit_nonneg_cubic(xs, &envelope)?;
    let lift = xs
        .iter()
        .zip(&envelope)
        .map(|(&x, &e)| e - (c[0] + x * (c[1] + x * (c[2] + x * c[3]))))
        .fold(0.0f64, f64::max);
    c[0] += lift;
    Ok(CubicEnvelope { xs: xs.to_vec(), envelope, coefficients: c })
}

/// Least-squares cubic with nonnegative coefficients, by exhausting the
/// sixteen active sets.
pub fn fit_nonneg_cubic(xs: &[f64], ys: &[f64]) -> Result<[f64; 4]> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::Parameter("cubic fit needs at least four (x, y) pairs".into()));
    }
    let mut best: Option<([f64; 4], f64)> = None;
    for mask in 1u32..16 {
        let cols: Vec<usize> = (0..4).filter(|k| mask & (1 << k) != 0).collect();
        let a = DMatrix::from_fn(xs.len(), cols.len(), |i, j| xs[i].powi(cols[j] as i32));
        let b = DVector::from_column_slice(ys);
        let svd = a.clone().svd(true, true);
        let Ok(sol) = svd.solve(&b, 1e-14) else { continue };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let res = (&a * &sol - &b).norm_squared();
        let mut c = [0.0; 4];
        for (j, &k) in cols.iter().enumerate() {
            c[k] = sol[j];
        }
        if best.is_none_or(|(_, r)| res < r) {
            best = Some((c, res));
        }
    }
    Ok(best.map(|(c, _)| c).unwrap_or([0.0; 4]))
}

/// Log-space check of `sqrt(2 pi) n^{n+1/2} e^{-n} e^{1/(12n+1)} <= n! <=
/// sqrt(2 pi) n^{n+1/2} e^{-n} e^{1/(12n)}`.
pub fn stirling_check(n: u64) -> Result<(bool, bool)> {
    let (lo, mid, hi) = stirling_log_bounds(n)?;
    Ok((lo <= mid, mid <= hi))
}

/// `(ln lower, ln n!, ln upper)`.
pub fn stirling_log_bounds(n: u64) -> Result<(f64, f64, f64)> {
    if n == 0 {
        return Err(Error::Parameter("Stirling bounds need n >= 1".into()));
    }
    let nf = n as f64;
    let base = 0.5 * (2.0 * PI).ln() + (nf + 0.5) * nf.ln() - nf;
    Ok((base + 1.0 / (12.0 * nf + 1.0), ln_gamma(nf + 1.0), base + 1.0 / (12.0 * nf)))
}

/// `d_n e_n lambda_n` from the Hermite–cosine comparison, in log space.
pub fn normalization_constant(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!("normalization constant needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let base = 0.25 * (PI * nf / 2.0).ln() - 0.5 * nf * std::f64::consts::LN_2;
    let log = if n.is_multiple_of(2) {
        base + 0.5 * ln_gamma(nf + 1.0) - ln_gamma(nf / 2.0 + 1.0)
    } else {
        base + 0.5 * ((nf + 1.0).ln() - (2.0 * nf + 1.0).ln()) + 0.5 * ln_gamma(nf + 2.0)
            - ln_gamma((nf + 1.0) / 2.0 + 1.0)
    };
    Ok(log.exp())
}

/// Parity-specific bracket: `[1 - 1/n, 1]` for even `n`, `[1 - 2/n, 1 + 1/n]` for odd.
pub fn normalization_bracket(n: usize) -> (f64, f64) {
    let nf = n as f64;
    if n.is_multiple_of(2) {
        (1.0 - 1.0 / nf, 1.0)
    } else {
        (1.0 - 2.0 / nf, 1.0 + 1.0 / nf)
    }
}

/// Window of `x` on which the Laguerre expansion is checked.
pub const EXPANSION_WINDOW: (f64, f64) = (0.1, 50.0);

/// `e^{-x/8n} x^{a/2} L_n^a(x/4n) / (2n)^a` against its two-term Bessel expansion.
pub fn laguerre_expansion_residual(n: usize, a: f64, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("expansion degree must be positive".into()));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Parameter(format!("expansion needs a > 0, got {a}")));
    }
    if !(EXPANSION_WINDOW.0..=EXPANSION_WINDOW.1).contains(&x) {
        return Err(Error::Domain(format!(
            "x = {x} outside [{}, {}]",
            EXPANSION_WINDOW.0, EXPANSION_WINDOW.1
        )));
    }
    let nf = n as f64;
    let l = laguerre(n, a, x / (4.0 * nf), false)?;
    let lhs = l * (-x / (8.0 * nf) + 0.5 * a * x.ln() - a * (2.0 * nf).ln()).exp();
    let r = x.sqrt();
    let ja = bessel_j(a, r)?;
    let jm = bessel_j(a - 1.0, r)?;
    let n2 = nf * nf;
    let rhs = ja + (a + 1.0) / (4.0 * nf) * r * jm
        - (3.0 * a * a + 5.0 * a + 2.0) / (96.0 * n2) * x * ja
        - x * r * jm / (96.0 * n2)
        + (3.0 * a * a * a + 2.0 * a * a - 3.0 * a - 2.0) / (48.0 * n2) * r * jm;
    Ok((lhs - rhs).abs())
}

pub fn laguerre_expansion_scan(ns: &[usize], a: f64, x: f64) -> Result<ResidualScan> {
    let r = ns
        .iter()
        .map(|&n| laguerre_expansion_residual(n, a, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualScan::build(ns, r, 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_cosine_small_cases() {
        // |1 - pi^{1/4}/sqrt 2| at n = 2, x = 0
        let r = hermite_cosine_residual(2, 0.0).unwrap();
        assert!((r - (1.0 - PI.powf(0.25) / 2f64.sqrt())).abs() < 1e-15);
        assert!((r - 0.058_60).abs() < 1e-5);
        assert!(hermite_cosine_residual(64, 0.0).unwrap() <= 0.05);
        assert!(matches!(hermite_cosine_residual(1, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn stirling_examples() {
        let (lo, mid, hi) = stirling_log_bounds(1).unwrap();
        assert!((lo.exp() - 0.995_870_2).abs() < 1e-7 && (hi.exp() - 1.002_274_4).abs() < 1e-7);
        assert_eq!(mid, 0.0);
        assert_eq!(stirling_check(10).unwrap(), (true, true));
    }

    #[test]
    fn normalization_small_n() {
        let v = normalization_constant(2).unwrap();
        assert!((v - PI.powf(0.25) / 2f64.sqrt()).abs() < 1e-14);
        // n = 3 from the odd formula by hand: (3 pi/2)^{1/4} 2^{-3/2} (4/7)^{1/2} sqrt(24) / 2
        let want = (1.5 * PI).powf(0.25) * 2f64.powf(-1.5) * (4.0f64 / 7.0).sqrt() * 24f64.sqrt() / 2.0;
        assert!((normalization_constant(3).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn nonneg_cubic_recovers_exact_data() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * x * x + 0.1 * x * x * x).collect();
        let c = fit_nonneg_cubic(&xs, &ys).unwrap();
        for (got, want) in c.iter().zip([1.0, 0.0, 0.5, 0.1]) {
            assert!((got - want).abs() < 1e-9, "{c:?}");
        }
        // a decreasing line forces the slope coefficient to zero
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 - x).collect();
        let c = fit_nonneg_cubic(&xs, &ys).unwrap();
        assert!(c.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn expansion_is_third_order() {
        let s = laguerre_expansion_scan(&[64, 128, 256], 1.0, 4.0).unwrap();
        for v in &s.scaled_residuals {
            assert!((v - 0.0773).abs() < 2e-3, "{s:?}");
        }
        assert!(laguerre_expansion_residual(1024, 1.0, 1.0).unwrap() <= 1e-7);
        assert!(matches!(laguerre_expansion_residual(8, 0.0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(laguerre_expansion_residual(8, 1.0, 60.0), Err(Error::Domain(_))));
    }
}
