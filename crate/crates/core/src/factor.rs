//! Product-form factorizations of the limiting and finite kernels.
//!
//! Each factor is a kernel `F(x, y) = c * m(k x y)` (optionally times `x y`),
//! so composing factors is a weighted matrix product of their Nyström
//! matrices. The way factors combine into the target is stored as data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::{hard_edge_tau, EnsembleParams, KernelFamily, KernelSpec, LimitFamily};
use crate::nystrom::{hs_norm, QuadratureGrid};
use crate::specfun::{bessel_j, hermite_psi, laguerre};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    SineCs,
    GueBulk,
    LueHard,
    Bessel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Profile {
    Cos,
    Sin,
    Hermite(usize),
    /// `t -> t psi_n(c t)`, with the `x y` prefactor folded in
    XHermite(usize),
    Laguerre { n: usize, a: f64 },
    Bessel { a: f64 },
}

/// One factor kernel `scale * m(arg * x y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub name: String,
    pub scale: f64,
    pub arg: f64,
    profile: Profile,
}

impl Factor {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let xy = x * y;
        let t = self.arg * xy;
        let m = match self.profile {
            Profile::Cos => t.cos(),
            Profile::Sin => t.sin(),
            Profile::Hermite(n) => hermite_psi(n, t)?,
            Profile::XHermite(n) => xy * hermite_psi(n, t)?,
            Profile::Laguerre { n, a } => laguerre(n, a, t, true)?,
            Profile::Bessel { a } => bessel_j(a, t.sqrt())?,
        };
        Ok(self.scale * m)
    }

    /// Raw matrix `F(x_i, x_j)`.
    pub fn matrix(&self, nodes: &[f64]) -> Result<DMatrix<f64>> {
        let n = nodes.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(nodes[i], nodes[j])?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

/// `sign * factors[left] ∘ factors[right]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub sign: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    pub kind: FactorKind,
    pub s: f64,
    pub factors: Vec<Factor>,
    pub combination: Vec<Term>,
    pub target: KernelSpec,
}

impl FactorSet {
    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    /// The interval the identity lives on.
    pub fn interval(&self) -> (f64, f64) {
        match self.kind {
            FactorKind::SineCs | FactorKind::GueBulk => (-self.s, self.s),
            FactorKind::LueHard | FactorKind::Bessel => (0.0, self.s),
        }
    }

    /// Human-readable form of the combination, e.g. `E_N E_N + ... - F_N G_N-1`.
    pub fn expression(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.combination.iter().enumerate() {
            let op = if t.sign < 0.0 { " - " } else { " + " };
            if i == 0 {
                if t.sign < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(op);
            }
            out.push_str(&format!("{} {}", self.factors[t.left].name, self.factors[t.right].name));
        }
        out
    }
}

fn factor(name: &str, scale: f64, arg: f64, profile: Profile) -> Factor {
    Factor { name: name.to_string(), scale, arg, profile }
}

fn term(sign: f64, left: usize, right: usize) -> Term {
    Term { sign, left, right }
}

/// Factors of the requested decomposition; `n`, `a` are ignored where unused.
pub fn build_factors(kind: FactorKind, n: usize, a: f64, s: f64) -> Result<FactorSet> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Parameter(format!("scale s must be positive, got {s}")));
    }
    use std::f64::consts::PI;
    let (factors, combination, target) = match kind {
        FactorKind::SineCs => {
            let c = (2.0 * s).powf(-0.5);
            (
                vec![factor("C", c, PI / s, Profile::Cos), factor("S", c, PI / s, Profile::Sin)],
                vec![term(1.0, 0, 0), term(1.0, 1, 1)],
                KernelSpec::limit(LimitFamily::Sine, 0.0, (-s, s))?,
            )
        }
        FactorKind::GueBulk => {
            if n < 2 {
                return Err(Error::Parameter("GUE decomposition needs N >= 2".into()));
            }
            let nf = n as f64;
            let arg = PI / (2.0 * nf).sqrt() / s;
            let e = (PI / (2.0 * s)).sqrt() * (nf / 2.0).powf(0.25);
            let fg = PI / (2.0 * s) * (2.0 * nf).powf(-0.25);
            let factors = vec![
                factor("E_N", e, arg, Profile::Hermite(n)),
                factor("E_N-1", e, arg, Profile::Hermite(n - 1)),
                factor("F_N", fg, arg, Profile::XHermite(n)),
                factor("F_N-1", fg, arg, Profile::XHermite(n - 1)),
                factor("G_N", fg, arg, Profile::Hermite(n)),
                factor("G_N-1", fg, arg, Profile::Hermite(n - 1)),
            ];
            let combination = vec![
                term(1.0, 0, 0),
                term(1.0, 1, 1),
                term(-1.0, 2, 5),
                term(-1.0, 3, 4),
                term(-1.0, 5, 2),
                term(-1.0, 4, 3),
            ];
            let target = KernelSpec::finite(KernelFamily::CdBulkGue, EnsembleParams::gue(n), (-s, s))?;
            (factors, combination, target)
        }
        FactorKind::LueHard => {
            if n < 1 || !(a >= 0.0 && a.fract() == 0.0) {
                return Err(Error::Parameter(format!(
                    "LUE decomposition needs N >= 1 and integer a >= 0, got N={n}, a={a}"
                )));
            }
            let nf = n as f64;
            let tau = hard_edge_tau(n, a)?;
            let scale = (tau * (ln_gamma(nf) - ln_gamma(nf + a)).exp() / (8.0 * s)).sqrt();
            let arg = tau / (4.0 * s * nf);
            let factors = vec![
                factor("H_N", scale, arg, Profile::Laguerre { n, a }),
                factor("M_N", scale, arg, Profile::Laguerre { n: n - 1, a }),
            ];
            let target = KernelSpec::finite(KernelFamily::CdHardLue, EnsembleParams::lue(n, a), (0.0, s))?;
            (factors, vec![term(1.0, 0, 1), term(1.0, 1, 0)], target)
        }
        FactorKind::Bessel => {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Parameter(format!("Bessel parameter must be >= 0, got {a}")));
            }
            (
                vec![factor("B_a", 0.5 / s.sqrt(), 1.0 / s, Profile::Bessel { a })],
                vec![term(1.0, 0, 0)],
                KernelSpec::limit(LimitFamily::Bessel, a, (0.0, s))?,
            )
        }
    };
    Ok(FactorSet { kind, s, factors, combination, target })
}

fn check_grid(fs: &FactorSet, grid: &QuadratureGrid) -> Result<()> {
    let (lo, hi) = fs.interval();
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-12 * (1.0 + v.abs());
    if !close(grid.lo, lo) || !close(grid.hi, hi) {
        return Err(Error::GridMismatch(format!(
            "{:?} factors live on [{lo}, {hi}], grid spans [{}, {}]",
            fs.kind, grid.lo, grid.hi
        )));
    }
    Ok(())
}

/// Raw matrices of every factor on the grid nodes.
pub fn factor_matrices(fs: &FactorSet, grid: &QuadratureGrid) -> Result<Vec<DMatrix<f64>>> {
    check_grid(fs, grid)?;
    fs.factors.iter().map(|f| f.matrix(&grid.nodes)).collect()
}

/// Max entrywise deviation of the composed factors from the target kernel.
pub fn verify_factorization(fs: &FactorSet, grid: &QuadratureGrid) -> Result<f64> {
    let mats = factor_matrices(fs, grid)?;
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&grid.weights));
    let n = grid.len();
    let mut total = DMatrix::<f64>::zeros(n, n);
    for t in &fs.combination {
        total += (&mats[t.left] * &w * &mats[t.right]) * t.sign;
    }
    let target = fs.target.matrix(&grid.nodes)?;
    Ok((total - target).amax())
}

/// Hilbert–Schmidt norm on `L^2(grid)` of `sum_k c_k F_k`.
pub fn hs_norm_of(terms: &[(f64, &Factor)], grid: &QuadratureGrid) -> Result<f64> {
    let n = grid.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (c, f) in terms {
        m += f.matrix(&grid.nodes)? * *c;
    }
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= sw[i] * sw[j];
        }
    }
    Ok(hs_norm(&m))
}
