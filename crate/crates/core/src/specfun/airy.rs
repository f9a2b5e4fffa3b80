//! Airy function `Ai` and its derivative on `[-20, 20]`.
//!
//! Maclaurin series on `[-5, 1]`, a damped Laplace-type integral for `x > 1`
//! and Bessel functions of order `+-1/3`, `+-2/3` for `x < -5`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::bessel::miller;
use super::FunctionValue;
use crate::error::{Error, Result};
use crate::quadrature::legendre_rule;

pub const AIRY_DOMAIN: (f64, f64) = (-20.0, 20.0);

const SERIES_LEFT: f64 = 5.0;
const AI0: f64 = 0.355_028_053_887_817_2;
const AIP0: f64 = -0.258_819_403_792_806_8;

/// `(Ai(x), Ai'(x))`.
pub fn airy(x: f64) -> Result<(f64, f64)> {
    let v = airy_value(x)?;
    Ok((v.0.value, v.1.value))
}

/// `Ai(x)` and `Ai'(x)` with error estimates.
pub fn airy_value(x: f64) -> Result<(FunctionValue, FunctionValue)> {
    if !(AIRY_DOMAIN.0..=AIRY_DOMAIN.1).contains(&x) {
        return Err(Error::Domain(format!(
            "Airy argument {x} outside [{}, {}]",
            AIRY_DOMAIN.0, AIRY_DOMAIN.1
        )));
    }
    Ok(if x < -SERIES_LEFT {
        bessel_negative(-x)
    } else if x <= 1.0 {
        maclaurin(x)
    } else {
        damped_integral(x)
    })
}

fn maclaurin(x: f64) -> (FunctionValue, FunctionValue) {
    let x3 = x * x * x;
    // f = sum a_k x^{3k}, g = sum b_k x^{3k+1}
    let mut a = 1.0;
    let mut b = 1.0;
    let mut p = 1.0; // x^{3k}
    let mut f = 1.0;
    let mut g = x;
    let mut fp_inner = 0.0; // f' / x^2 = sum_{k>=1} 3k a_k x^{3(k-1)}
    let mut gp = 1.0; // sum (3k+1) b_k x^{3k}
    let mut mag = AI0.abs() + AIP0.abs() * x.abs();
    for k in 1..200 {
        let kf = k as f64;
        let q = p; // x^{3(k-1)}
        a /= (3.0 * kf - 1.0) * (3.0 * kf);
        b /= (3.0 * kf) * (3.0 * kf + 1.0);
        p *= x3;
        let tf = a * p;
        let tg = b * p * x;
        f += tf;
        g += tg;
        fp_inner += 3.0 * kf * a * q;
        gp += (3.0 * kf + 1.0) * b * p;
        mag += AI0 * tf.abs() + AIP0.abs() * tg.abs();
        if tf.abs() + tg.abs() < 1e-18 * (f.abs() + g.abs()) && k > 2 {
            break;
        }
    }
    let ai = AI0 * f + AIP0 * g;
    let aip = AI0 * x * x * fp_inner + AIP0 * gp;
    let err = 8.0 * f64::EPSILON * mag;
    (FunctionValue::new(ai, err), FunctionValue::new(aip, err * (1.0 + x.abs())))
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(200))
}

fn damped_integral(x: f64) -> (FunctionValue, FunctionValue) {
    // Ai(x) = e^{-zeta}/pi int_0^inf exp(-sqrt(x) t^2) cos(t^3/3) dt
    let sx = x.sqrt();
    let zeta = 2.0 / 3.0 * x * sx;
    let len = (42.0 / sx).sqrt();
    let (nodes, weights) = rule();
    let mut i0 = 0.0;
    let mut i2 = 0.0;
    for (&u, &w) in nodes.iter().zip(weights) {
        let t = 0.5 * len * (u + 1.0);
        let e = (-sx * t * t).exp() * (t * t * t / 3.0).cos() * w * 0.5 * len;
        i0 += e;
        i2 += t * t * e;
    }
    let pre = (-zeta).exp() / PI;
    let ai = pre * i0;
    let aip = -sx * ai - pre * i2 / (2.0 * sx);
    let rel = 1e-14;
    (FunctionValue::new(ai, rel * ai.abs()), FunctionValue::new(aip, rel * aip.abs()))
}

fn bessel_negative(z: f64) -> (FunctionValue, FunctionValue) {
    // Ai(-z) = sqrt(z)/3 (J_{1/3} + J_{-1/3})(zeta), Ai'(-z) = z/3 (J_{2/3} - J_{-2/3})(zeta)
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let (jm13, j23) = miller(-1.0 / 3.0, zeta);
    let (jm23, j13) = miller(-2.0 / 3.0, zeta);
    let ai = z.sqrt() / 3.0 * (j13 + jm13);
    let aip = z / 3.0 * (j23 - jm23);
    let err = 64.0 * f64::EPSILON * (1.0 + zeta);
    (FunctionValue::new(ai, err), FunctionValue::new(aip, err * z.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    // mpmath.airyai(x), airyai(x, 1)
    const FROZEN: &[(f64, f64, f64)] = &[
        (-20.0, -0.176_406_127_077_984_69, 0.892_862_856_736_471_24),
        (-15.0, 0.278_217_490_870_828_93, 0.272_374_204_308_642_02),
        (-8.5, -0.330_290_237_630_208_88, -0.032_313_348_284_639_136),
        (-8.0, -0.052_705_050_356_386_203, 0.935_560_938_198_306_55),
        (-7.9, 0.041_701_883_617_386_709, 0.940_042_998_026_280_24),
        (-3.0, -0.378_814_293_677_658_07, 0.314_583_769_216_598_81),
        (-1.0, 0.535_560_883_292_352_12, -0.010_160_567_116_645_209),
        (0.0, 0.355_028_053_887_817_24, -0.258_819_403_792_806_8),
        (0.5, 0.231_693_606_480_833_49, -0.224_910_532_664_683_89),
        (1.0, 0.135_292_416_312_881_42, -0.159_147_441_296_793_21),
        (1.01, 0.133_707_702_468_958_57, -0.157_795_740_226_381_47),
        (2.0, 0.034_924_130_423_274_379, -0.053_090_384_433_653_632),
        (5.0, 1.083_444_281_360_744_2e-4, -2.474_138_908_684_624_8e-4),
        (10.0, 1.104_753_255_289_868_6e-10, -3.520_633_676_738_923_6e-10),
        (20.0, 1.691_672_868_670_540_3e-27, -7.586_391_625_748_355e-27),
    ];

    #[test]
    fn matches_frozen_values() {
        for &(x, ai, aip) in FROZEN {
            let (a, d) = airy(x).unwrap();
            let scale = ai.abs().max(aip.abs());
            let tol = if x > 1.0 { 1e-13 * scale } else { 2e-14 * (1.0 + x.abs()) };
            assert!((a - ai).abs() < tol, "Ai({x}) = {a}, want {ai}");
            assert!((d - aip).abs() < tol * (1.0 + x.abs()), "Ai'({x}) = {d}, want {aip}");
        }
    }

    #[test]
    fn satisfies_airy_equation() {
        // Ai'' = x Ai, checked by central differences of Ai'
        for &x in &[-15.0, -9.0, -4.0, 0.3, 1.5, 6.0] {
            let h: f64 = 1e-3;
            let d2 = (airy(x + h).unwrap().1 - airy(x - h).unwrap().1) / (2.0 * h);
            let ai = airy(x).unwrap().0;
            let tol = h * h * (1.0 + x * x);
            assert!((d2 - x * ai).abs() < tol, "x={x} {d2} {}", x * ai);
        }
    }

    #[test]
    fn continuous_across_regime_switches() {
        for &x in &[-5.0, 1.0] {
            let (l, dl) = airy(x - 1e-12).unwrap();
            let (r, dr) = airy(x + 1e-12).unwrap();
            assert!((l - r).abs() < 1e-11 && (dl - dr).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(matches!(airy(20.5), Err(Error::Domain(_))));
        assert!(matches!(airy(f64::NAN), Err(Error::Domain(_))));
    }
}
