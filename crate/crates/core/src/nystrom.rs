//! Nyström discretization of integral operators and their spectral quantities.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::legendre_rule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

/// Gauss–Legendre rule with `n_nodes` points on `[lo, hi]`.
pub fn gauss_legendre(n_nodes: usize, lo: f64, hi: f64) -> Result<QuadratureGrid> {
    if n_nodes == 0 {
        return Err(Error::Parameter("need at least one quadrature node".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Parameter(format!("invalid quadrature interval [{lo}, {hi}]")));
    }
    let (t, w) = legendre_rule(n_nodes);
    let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
    Ok(QuadratureGrid {
        nodes: t.iter().map(|v| mid + half * v).collect(),
        weights: w.iter().map(|v| half * v).collect(),
        lo,
        hi,
    })
}

/// Starting node count for an interval: `24 + 8 * ceil(length)`.
pub fn default_nodes(lo: f64, hi: f64) -> usize {
    24 + 8 * (hi - lo).ceil().max(0.0) as usize
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Descending eigenvalues and singular values of a symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub singular_values: Vec<f64>,
}

pub fn symmetric_spectrum(m: &DMatrix<f64>) -> SpectrumSummary {
    if m.nrows() == 0 {
        return SpectrumSummary { eigenvalues: vec![], singular_values: vec![] };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    // stable sorts keep input order on ties
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let mut singular_values: Vec<f64> = eigenvalues.iter().map(|v| v.abs()).collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    SpectrumSummary { eigenvalues, singular_values }
}

/// `(sum s_j^p)^{1/p}`, scaled to avoid overflow.
fn schatten_of(singular_values: &[f64], p: f64) -> f64 {
    let top = singular_values.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return singular_values.iter().sum();
    }
    let s: f64 = singular_values.iter().map(|v| (v / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

/// Symmetrized Nyström matrix `sqrt(w_i w_j) K(x_i, x_j)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    pub grid: QuadratureGrid,
    pub matrix: DMatrix<f64>,
}

impl DiscreteOperator {
    pub fn discretize<K: Kernel + ?Sized>(kernel: &K, grid: &QuadratureGrid) -> Result<Self> {
        let mut m = kernel.matrix(&grid.nodes)?;
        let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
        let n = grid.len();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= sw[i] * sw[j];
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { grid: grid.clone(), matrix: sym })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spectrum(&self) -> SpectrumSummary {
        symmetric_spectrum(&self.matrix)
    }

    fn check_grid(&self, other: &DiscreteOperator) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "operators live on different grids ({} and {} nodes on [{}, {}] / [{}, {}])",
                self.grid.len(),
                other.grid.len(),
                self.grid.lo,
                self.grid.hi,
                other.grid.lo,
                other.grid.hi
            )));
        }
        Ok(())
    }

    /// `self - other` on the shared grid.
    pub fn difference(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        self.check_grid(other)?;
        Ok(DiscreteOperator { grid: self.grid.clone(), matrix: &self.matrix - &other.matrix })
    }
}

/// Schatten `p`-norm of a discretized operator, `p >= 1`.
pub fn schatten_norm(op: &DiscreteOperator, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("Schatten exponent must be >= 1, got {p}")));
    }
    Ok(schatten_of(&op.spectrum().singular_values, p))
}

/// Schatten `p`-norm of `op1 - op2`.
pub fn schatten_norm_diff(op1: &DiscreteOperator, op2: &DiscreteOperator, p: f64) -> Result<f64> {
    schatten_norm(&op1.difference(op2)?, p)
}

/// Trace norm `||op1 - op2||_1`.
pub fn trace_norm_diff(op1: &DiscreteOperator, op2: &DiscreteOperator) -> Result<f64> {
    schatten_norm_diff(op1, op2, 1.0)
}

/// Hilbert–Schmidt (Frobenius) norm of a matrix.
pub fn hs_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Descending singular values of a general matrix.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schatten `p`-norm of a general matrix.
pub fn schatten_norm_matrix(m: &DMatrix<f64>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("Schatten exponent must be >= 1, got {p}")));
    }
    Ok(schatten_of(&singular_values(m), p))
}

/// Trace norm of a symmetric matrix.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    schatten_of(&symmetric_spectrum(m).singular_values, 1.0)
}

/// `det(I - K) = prod (1 - lambda_j)` from eigenvalues clipped to `<= 1`.
pub fn det_from_eigenvalues(eigs: &[f64]) -> f64 {
    let mut log = 0.0;
    for &l in eigs {
        let l = l.min(1.0);
        if l >= 1.0 {
            return 0.0;
        }
        log += (-l).ln_1p();
    }
    log.exp()
}

pub fn fredholm_det(op: &DiscreteOperator) -> f64 {
    det_from_eigenvalues(&op.spectrum().eigenvalues)
}
