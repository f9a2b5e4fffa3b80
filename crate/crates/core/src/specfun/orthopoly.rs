//! Orthonormal polynomial families and their weighted functions.
//!
//! All three classical families are driven through one three-term recurrence
//! `x p_n = A_{n+1} p_{n+1} + B_n p_n + A_n p_{n-1}` run with a running log
//! scale, so degrees in the thousands neither overflow nor underflow.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const RESCALE_HI: f64 = 1e150;
const RESCALE_LO: f64 = 1e-150;

/// A classical weight with its orthonormal polynomials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrthoFamily {
    /// Weight `exp(-x^2)` on the real line.
    Hermite,
    /// Weight `x^a exp(-x)` on `[0, inf)`.
    Laguerre { a: f64 },
    /// Weight `(1-x)^a (1+x)^b` on `[-1, 1]`.
    Jacobi { a: f64, b: f64 },
}

/// Weighted orthonormal functions `f_{N-1}`, `f_N` at one point plus the
/// Christoffel–Darboux diagonal `sum_{k<N} f_k(x)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthoValues {
    pub lower: f64,
    pub upper: f64,
    pub cd_diagonal: f64,
}

impl OrthoFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OrthoFamily::Hermite => Ok(()),
            OrthoFamily::Laguerre { a } => {
                if a.is_finite() && a > -1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("Laguerre parameter must exceed -1, got {a}")))
                }
            }
            OrthoFamily::Jacobi { a, b } => {
                if a.is_finite() && b.is_finite() && a > -1.0 && b > -1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "Jacobi parameters must exceed -1, got a={a}, b={b}"
                    )))
                }
            }
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match self {
            OrthoFamily::Hermite => x.is_finite(),
            OrthoFamily::Laguerre { .. } => x.is_finite() && x >= 0.0,
            OrthoFamily::Jacobi { .. } => (-1.0..=1.0).contains(&x),
        }
    }

    /// Off-diagonal recurrence coefficient `A_n` for `n >= 1`.
    pub fn off_diag(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            OrthoFamily::Hermite => (nf / 2.0).sqrt(),
            OrthoFamily::Laguerre { a } => -(nf * (nf + a)).sqrt(),
            OrthoFamily::Jacobi { a, b } => {
                let s = 2.0 * nf + a + b;
                let num = nf * (nf + a) * (nf + b) * (nf + a + b);
                let den = (s - 1.0) * (s + 1.0);
                if n == 1 && (a + b + 1.0).abs() < 1e-300 {
                    // s - 1 = 0 cancels against n + a + b = 0
                    return (2.0 / s) * ((nf + a) * (nf + b) / (s + 1.0)).sqrt();
                }
                (2.0 / s) * (num / den).sqrt()
            }
        }
    }

    /// Diagonal recurrence coefficient `B_n`.
    pub fn diag(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            OrthoFamily::Hermite => 0.0,
            OrthoFamily::Laguerre { a } => 2.0 * nf + a + 1.0,
            OrthoFamily::Jacobi { a, b } => {
                let s = 2.0 * nf + a + b;
                if n == 0 {
                    (b - a) / (a + b + 2.0)
                } else {
                    (b * b - a * a) / (s * (s + 2.0))
                }
            }
        }
    }

    fn log_p0(&self) -> f64 {
        match *self {
            OrthoFamily::Hermite => -0.25 * std::f64::consts::PI.ln(),
            OrthoFamily::Laguerre { a } => -0.5 * ln_gamma(a + 1.0),
            OrthoFamily::Jacobi { a, b } => {
                let log_h0 = (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0)
                    + ln_gamma(b + 1.0)
                    - ln_gamma(a + b + 2.0);
                -0.5 * log_h0
            }
        }
    }

    /// Log of the weight; `-inf` where the weight vanishes.
    pub fn log_weight(&self, x: f64) -> f64 {
        match *self {
            OrthoFamily::Hermite => -x * x,
            OrthoFamily::Laguerre { a } => {
                if a == 0.0 {
                    -x
                } else {
                    a * x.ln() - x
                }
            }
            OrthoFamily::Jacobi { a, b } => {
                let l = if a == 0.0 { 0.0 } else { a * (-x).ln_1p() };
                let r = if b == 0.0 { 0.0 } else { b * x.ln_1p() };
                l + r
            }
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        self.validate()?;
        if !self.in_support(x) {
            return Err(Error::Domain(format!("{x} outside the support of {self:?}")));
        }
        Ok(())
    }

    /// Weighted orthonormal function `f_n(x) = sqrt(w(x)) p_n(x)`.
    pub fn function(&self, n: usize, x: f64) -> Result<f64> {
        self.check(x)?;
        let r = self.recur(n, x);
        Ok(scaled(r.p, r.log_scale + 0.5 * self.log_weight(x)))
    }

    /// `f_{N-1}`, `f_N` and the CD diagonal at `x`, for `N >= 1`.
    pub fn evaluate(&self, n: usize, x: f64) -> Result<OrthoValues> {
        if n == 0 {
            return Err(Error::Parameter("kernel degree N must be at least 1".into()));
        }
        self.check(x)?;
        let r = self.recur(n, x);
        let lw = self.log_weight(x);
        let half = r.log_scale + 0.5 * lw;
        let wronskian = r.dp * r.pm - r.dpm * r.p;
        let cd_diagonal = self.off_diag(n) * scaled(wronskian, 2.0 * r.log_scale + lw);
        Ok(OrthoValues {
            lower: scaled(r.pm, half),
            upper: scaled(r.p, half),
            cd_diagonal,
        })
    }

    fn start(&self) -> Recurrence {
        Recurrence { p: 1.0, pm: 0.0, dp: 0.0, dpm: 0.0, log_scale: self.log_p0() }
    }

    /// One step from degree `k` to `k + 1`.
    fn step(&self, st: &mut Recurrence, k: usize, x: f64) {
        let a_next = self.off_diag(k + 1);
        let a_k = if k == 0 { 0.0 } else { self.off_diag(k) };
        let b_k = self.diag(k);
        let p_next = ((x - b_k) * st.p - a_k * st.pm) / a_next;
        let dp_next = ((x - b_k) * st.dp - a_k * st.dpm + st.p) / a_next;
        st.pm = st.p;
        st.dpm = st.dp;
        st.p = p_next;
        st.dp = dp_next;
        st.renormalize();
    }

    /// Runs the recurrence up to degree `n`; values are relative to `exp(log_scale)`.
    fn recur(&self, n: usize, x: f64) -> Recurrence {
        let mut st = self.start();
        for k in 0..n {
            self.step(&mut st, k, x);
        }
        st
    }

    /// `f_0(x), ..., f_{n-1}(x)` in one pass.
    pub fn functions(&self, n: usize, x: f64) -> Result<Vec<f64>> {
        self.check(x)?;
        let half = 0.5 * self.log_weight(x);
        let mut st = self.start();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(scaled(st.p, st.log_scale + half));
            if k + 1 < n {
                self.step(&mut st, k, x);
            }
        }
        Ok(out)
    }
}

struct Recurrence {
    p: f64,
    pm: f64,
    dp: f64,
    dpm: f64,
    log_scale: f64,
}

impl Recurrence {
    fn renormalize(&mut self) {
        let m = self
            .p
            .abs()
            .max(self.pm.abs())
            .max(self.dp.abs())
            .max(self.dpm.abs());
        if m > RESCALE_HI || (m > 0.0 && m < RESCALE_LO) {
            self.p /= m;
            self.pm /= m;
            self.dp /= m;
            self.dpm /= m;
            self.log_scale += m.ln();
        }
    }
}

fn scaled(v: f64, log_factor: f64) -> f64 {
    if v == 0.0 || log_factor == f64::NEG_INFINITY {
        return 0.0;
    }
    v.signum() * (v.abs().ln() + log_factor).exp()
}

/// Hermite function `psi_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) exp(-x^2/2)`.
pub fn hermite_psi(n: usize, x: f64) -> Result<f64> {
    OrthoFamily::Hermite.function(n, x)
}

/// Generalized Laguerre polynomial `L_n^a(x)`, or with `weighted` the function
/// `exp(-x/2) x^{a/2} L_n^a(x)` (not normalized).
pub fn laguerre(n: usize, a: f64, x: f64, weighted: bool) -> Result<f64> {
    OrthoFamily::Laguerre { a }.validate()?;
    if !x.is_finite() || (weighted && x < 0.0) {
        return Err(Error::Domain(format!("Laguerre argument {x} out of range")));
    }
    let extra = if weighted {
        let xa = if a == 0.0 { 0.0 } else { 0.5 * a * x.ln() };
        -0.5 * x + xa
    } else {
        0.0
    };
    if x >= 0.0 && n as f64 * x <= LAGUERRE_SERIES_MAX {
        let (v, ls) = laguerre_series(n, a, x);
        return Ok(scaled(v, ls + extra));
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + a + 1.0 - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > RESCALE_HI || (m > 0.0 && m < RESCALE_LO) {
            cur /= m;
            prev /= m;
            log_scale += m.ln();
        }
    }
    Ok(scaled(cur, log_scale + extra))
}

/// Largest `n x` evaluated by the power series.
const LAGUERRE_SERIES_MAX: f64 = 16.0;

/// `L_n^a(x) = binom(n+a, n) sum_k (-x)^k / k! * binom(n+a, n-k) / binom(n+a, n)`,
/// as `(value, log_scale)`.
fn laguerre_series(n: usize, a: f64, x: f64) -> (f64, f64) {
    let (mut c0, mut ls) = (1.0f64, 0.0f64);
    for j in 1..=n {
        c0 *= 1.0 + a / j as f64;
        if c0 > RESCALE_HI {
            ls += c0.ln();
            c0 = 1.0;
        }
    }
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 0..n {
        let kf = k as f64;
        term *= -x * (n as f64 - kf) / ((kf + 1.0) * (kf + 1.0 + a));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() && kf > n as f64 * x {
            break;
        }
    }
    (sum * c0, ls)
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` in the standard normalization.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> Result<f64> {
    OrthoFamily::Jacobi { a, b }.validate()?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("Jacobi argument {x} outside [-1, 1]")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut prev = 1.0;
    let mut cur = (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0;
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let c1 = 2.0 * (kf + 1.0) * (kf + a + b + 1.0) * s;
        let c2 = (s + 1.0) * (a * a - b * b);
        let c3 = s * (s + 1.0) * (s + 2.0);
        let c4 = 2.0 * (kf + a) * (kf + b) * (s + 2.0);
        let next = ((c2 + c3 * x) * cur - c4 * prev) / c1;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::legendre_rule;

    fn hermite_physicists(n: usize, x: f64) -> f64 {
        // explicit series H_n(x) = n! sum_m (-1)^m (2x)^{n-2m} / (m! (n-2m)!)
        let mut s = 0.0;
        for m in 0..=n / 2 {
            let mut t = if m % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..=n {
                t *= k as f64;
            }
            for k in 1..=m {
                t /= k as f64;
            }
            for k in 1..=(n - 2 * m) {
                t /= k as f64;
            }
            s += t * (2.0 * x).powi((n - 2 * m) as i32);
        }
        s
    }

    #[test]
    fn hermite_matches_explicit_series() {
        for n in 0..8usize {
            for &x in &[-1.7, -0.3, 0.0, 0.9, 2.2] {
                let mut norm = 2f64.powi(n as i32) * std::f64::consts::PI.sqrt();
                for k in 1..=n {
                    norm *= k as f64;
                }
                let want = hermite_physicists(n, x) * (-x * x / 2.0).exp() / norm.sqrt();
                let got = hermite_psi(n, x).unwrap();
                assert!((got - want).abs() < 1e-13, "n={n} x={x} {got} {want}");
            }
        }
    }

    #[test]
    fn hermite_known_value() {
        // psi_0(0) = pi^{-1/4}
        let v = hermite_psi(0, 0.0).unwrap();
        assert!((v - 0.751_125_544_464_942_5).abs() < 1e-15);
    }

    #[test]
    fn laguerre_closed_forms() {
        let a = 0.7;
        let x = 1.3;
        assert!((laguerre(1, a, x, false).unwrap() - (1.0 + a - x)).abs() < 1e-14);
        let l2 = 0.5 * (x * x - 2.0 * (a + 2.0) * x + (a + 1.0) * (a + 2.0));
        assert!((laguerre(2, a, x, false).unwrap() - l2).abs() < 1e-14);
        let w = laguerre(2, a, x, true).unwrap();
        assert!((w - l2 * (-x / 2.0).exp() * x.powf(a / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn laguerre_small_argument_high_degree() {
        let cases = [
            (1024, 1.0, 0.1 / 4096.0, 1012.240_722_526_575_9),
            (256, 1.0, 0.1 / 1024.0, 253.800_805_603_558_27),
            (512, 2.5, 8.0 / 512.0, 13_818.528_627_193_374),
        ];
        for (n, a, x, want) in cases {
            let got = laguerre(n, a, x, false).unwrap();
            assert!((got / want - 1.0).abs() < 1e-13, "n={n} {got} {want}");
        }
    }

    #[test]
    fn jacobi_closed_forms() {
        let (a, b) = (0.5, 1.5);
        // P_n(1) = (a+1)_n / n!
        let mut want = 1.0;
        for k in 0..6 {
            let got = jacobi(k, a, b, 1.0).unwrap();
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "k={k}");
            want *= (a + 1.0 + k as f64) / (k as f64 + 1.0);
        }
    }

    fn gram(family: OrthoFamily, n: usize, xs: &[f64], ws: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = xs
                    .iter()
                    .zip(ws)
                    .map(|(&x, &w)| {
                        w * family.function(i, x).unwrap() * family.function(j, x).unwrap()
                    })
                    .sum();
                let d = if i == j { s - 1.0 } else { s };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    #[test]
    fn families_are_orthonormal() {
        let (t, w) = legendre_rule(400);
        // Hermite on [-12, 12]
        let xs: Vec<f64> = t.iter().map(|v| 12.0 * v).collect();
        let ws: Vec<f64> = w.iter().map(|v| 12.0 * v).collect();
        assert!(gram(OrthoFamily::Hermite, 8, &xs, &ws) < 1e-12);
        // Laguerre a = 2 on [0, 80]
        let xs: Vec<f64> = t.iter().map(|v| 40.0 * (v + 1.0)).collect();
        let ws: Vec<f64> = w.iter().map(|v| 40.0 * v).collect();
        assert!(gram(OrthoFamily::Laguerre { a: 2.0 }, 8, &xs, &ws) < 1e-12);
        // Jacobi a = 1, b = 2 on [-1, 1]
        assert!(gram(OrthoFamily::Jacobi { a: 1.0, b: 2.0 }, 8, &t, &w) < 1e-12);
    }

    #[test]
    fn cd_diagonal_equals_sum_of_squares() {
        let cases = [
            (OrthoFamily::Hermite, 0.4),
            (OrthoFamily::Laguerre { a: 0.0 }, 3.1),
            (OrthoFamily::Laguerre { a: 1.5 }, 0.2),
            (OrthoFamily::Jacobi { a: 0.5, b: -0.5 }, 0.3),
            (OrthoFamily::Jacobi { a: 3.0, b: 1.0 }, -0.8),
        ];
        for (fam, x) in cases {
            for n in [1usize, 2, 5, 20] {
                let direct: f64 = (0..n).map(|k| fam.function(k, x).unwrap().powi(2)).sum();
                let v = fam.evaluate(n, x).unwrap();
                assert!(
                    (v.cd_diagonal - direct).abs() < 1e-12 * direct.max(1.0),
                    "{fam:?} n={n} {} {direct}",
                    v.cd_diagonal
                );
                assert!((v.upper - fam.function(n, x).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn functions_match_single_degrees() {
        for (fam, x) in [(OrthoFamily::Hermite, 1.3), (OrthoFamily::Laguerre { a: 0.5 }, 0.02)] {
            let all = fam.functions(300, x).unwrap();
            assert_eq!(all.len(), 300);
            for k in [0, 1, 7, 150, 299] {
                assert_eq!(all[k], fam.function(k, x).unwrap());
            }
        }
        assert!(OrthoFamily::Jacobi { a: 0.0, b: 0.0 }.functions(3, 1.5).is_err());
    }

    #[test]
    fn large_degree_stays_finite() {
        let v = OrthoFamily::Laguerre { a: 4.0 }.evaluate(4096, 1e-3).unwrap();
        assert!(v.lower.is_finite() && v.upper.is_finite() && v.cd_diagonal > 0.0);
        let v = OrthoFamily::Hermite.evaluate(4096, 90.0).unwrap();
        assert!(v.cd_diagonal.is_finite() && v.cd_diagonal > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(laguerre(3, -1.0, 0.5, false), Err(Error::Parameter(_))));
        assert!(matches!(
            OrthoFamily::Laguerre { a: 0.0 }.function(2, -0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            OrthoFamily::Jacobi { a: 0.0, b: 0.0 }.function(2, 1.5),
            Err(Error::Domain(_))
        ));
    }
}
