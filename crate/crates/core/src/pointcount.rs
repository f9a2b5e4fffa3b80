//! Point-count laws of restricted determinantal processes.
//!
//! The count of points in a set is a sum of independent Bernoulli variables
//! with the eigenvalues of the restricted operator as success probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SOFT_EDGE_CUTOFF};
use crate::nystrom::{default_nodes, det_from_eigenvalues, gauss_legendre, DiscreteOperator};

/// Eigenvalues further than this outside `[0, 1]` signal a broken discretization.
pub const VALIDITY_TOL: f64 = 1e-6;

/// Eigenvalues below this are dropped before convolution.
pub const NEGLIGIBLE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCountPmf {
    pub probs: Vec<f64>,
}

impl PointCountPmf {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSample {
    pub seed: u64,
    pub draws: Vec<usize>,
}

/// Descending eigenvalues of a restricted operator, clipped to `[0, 1]`.
pub fn restricted_spectrum(op: &DiscreteOperator) -> Result<Vec<f64>> {
    let eigs = op.spectrum().eigenvalues;
    if let (Some(&top), Some(&bottom)) = (eigs.first(), eigs.last()) {
        if top > 1.0 + VALIDITY_TOL || bottom < -VALIDITY_TOL {
            return Err(Error::Validity(format!(
                "restricted operator has eigenvalues in [{bottom:e}, {top:e}], outside [0, 1]"
            )));
        }
    }
    Ok(eigs
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .filter(|&v| v >= NEGLIGIBLE)
        .collect())
}

/// Law of a sum of independent Bernoulli variables.
pub fn count_pmf(eigs: &[f64]) -> PointCountPmf {
    let mut probs = Vec::with_capacity(eigs.len() + 1);
    probs.push(1.0);
    for &l in eigs {
        let l = l.clamp(0.0, 1.0);
        probs.push(0.0);
        for k in (1..probs.len()).rev() {
            probs[k] = probs[k] * (1.0 - l) + probs[k - 1] * l;
        }
        probs[0] *= 1.0 - l;
    }
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    PointCountPmf { probs }
}

fn padded_cdfs(p: &PointCountPmf, q: &PointCountPmf) -> (Vec<f64>, Vec<f64>) {
    let n = p.probs.len().max(q.probs.len());
    let extend = |c: Vec<f64>| {
        let last = c.last().copied().unwrap_or(0.0);
        let mut c = c;
        c.resize(n, last);
        c
    };
    (extend(p.cdf()), extend(q.cdf()))
}

/// Exact `W_1` between two integer laws, `sum_k |F_p(k) - F_q(k)|`.
pub fn w1_counts(p: &PointCountPmf, q: &PointCountPmf) -> f64 {
    let (fp, fq) = padded_cdfs(p, q);
    fp.iter().zip(&fq).map(|(a, b)| (a - b).abs()).sum()
}

/// Total variation distance `1/2 sum_k |p_k - q_k|`.
pub fn tv_distance(p: &PointCountPmf, q: &PointCountPmf) -> f64 {
    let n = p.probs.len().max(q.probs.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|k| (at(&p.probs, k) - at(&q.probs, k)).abs()).sum::<f64>()
}

/// `sum_j |lambda_j - lambda~_j|` over descending lists padded with zeros.
pub fn coupling_bound(eigs1: &[f64], eigs2: &[f64]) -> f64 {
    let n = eigs1.len().max(eigs2.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    (0..n).map(|j| (at(eigs1, j) - at(eigs2, j)).abs()).sum()
}

/// Independent counts `#{j : U_j < lambda_j}`.
///
/// Draw `i` reads its uniforms from ChaCha8 seeded with `seed` on stream `i`,
/// so two lists sampled with one seed share their uniforms index by index.
pub fn sample_counts(eigs: &[f64], seed: u64, n_draws: usize) -> Result<CountSample> {
    if n_draws == 0 {
        return Err(Error::Parameter("need at least one draw".into()));
    }
    if eigs.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Parameter("sampling probabilities must lie in [0, 1]".into()));
    }
    let draws = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            eigs.iter().filter(|&&l| rng.random::<f64>() < l).count()
        })
        .collect();
    Ok(CountSample { seed, draws })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// `P(lambda_min <= s) = 1 - P(no points in [0, s])`.
    HardLeast,
    /// `P(lambda_max <= s) = P(no points in (s, T])`.
    SoftLargest,
}

/// Determinant of `I - K` on `interval`, doubling nodes until it settles to `tol`.
pub fn converged_det(kernel: &KernelSpec, interval: (f64, f64), tol: f64) -> Result<(f64, usize)> {
    let k = kernel.restrict(interval)?;
    let det_at = |n: usize| -> Result<f64> {
        let grid = gauss_legendre(n, interval.0, interval.1)?;
        let op = DiscreteOperator::discretize(&k, &grid)?;
        Ok(det_from_eigenvalues(&restricted_spectrum(&op)?))
    };
    let mut n = default_nodes(interval.0, interval.1);
    let mut prev = det_at(n)?;
    for _ in 0..5 {
        let next = det_at(2 * n)?;
        if (next - prev).abs() <= tol {
            return Ok((prev, n));
        }
        prev = next;
        n *= 2;
    }
    Err(Error::NotConverged(format!(
        "Fredholm determinant on {interval:?} did not settle to {tol:e} by {n} nodes"
    )))
}

/// Extreme-eigenvalue CDF of the process with kernel `kernel` at `s`.
pub fn gap_cdf(kind: GapKind, kernel: &KernelSpec, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("gap point {s} must be finite")));
    }
    match kind {
        GapKind::HardLeast => {
            if s <= 0.0 {
                return Ok(0.0);
            }
            Ok(1.0 - converged_det(kernel, (0.0, s), 1e-12)?.0)
        }
        GapKind::SoftLargest => {
            if s >= SOFT_EDGE_CUTOFF {
                return Ok(1.0);
            }
            Ok(converged_det(kernel, (s, SOFT_EDGE_CUTOFF), 1e-12)?.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B0Match {
    ExpS,
    ExpSOver4,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct B0Report {
    pub s: f64,
    pub gap_probability: f64,
    pub exp_s: f64,
    pub exp_s_over_4: f64,
    pub matches: B0Match,
}

/// Compares the `a = 0` Bessel gap probability on `[0, s]` with `e^{-s}` and `e^{-s/4}`.
pub fn b0_match(s: f64) -> Result<B0Report> {
    if !(s > 0.0 && s <= 50.0) {
        return Err(Error::Domain(format!("gap point {s} outside (0, 50]")));
    }
    let bessel = KernelSpec::limit(crate::kernels::LimitFamily::Bessel, 0.0, (0.0, s))?;
    let gap = 1.0 - gap_cdf(GapKind::HardLeast, &bessel, s)?;
    let (e1, e4) = ((-s).exp(), (-s / 4.0).exp());
    let tol = 1e-8;
    let matches = if (gap - e1).abs() < tol {
        B0Match::ExpS
    } else if (gap - e4).abs() < tol {
        B0Match::ExpSOver4
    } else {
        B0Match::Neither
    };
    Ok(B0Report { s, gap_probability: gap, exp_s: e1, exp_s_over_4: e4, matches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::LimitFamily;

    fn pmf(v: &[f64]) -> PointCountPmf {
        PointCountPmf { probs: v.to_vec() }
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(count_pmf(&[]).probs, vec![1.0]);
        assert_eq!(count_pmf(&[0.5, 0.5]).probs, vec![0.25, 0.5, 0.25]);
        let p = count_pmf(&[0.9, 0.3, 0.05]);
        assert!((p.mean() - 1.25).abs() < 1e-15);
        assert!((p.variance() - (0.09 + 0.21 + 0.0475)).abs() < 1e-15);
    }

    #[test]
    fn w1_examples() {
        let b7 = pmf(&[0.3, 0.7]);
        let b4 = pmf(&[0.6, 0.4]);
        assert!((w1_counts(&b7, &b4) - 0.3).abs() < 1e-15);
        assert_eq!(w1_counts(&b7, &b7), 0.0);
        assert_eq!(w1_counts(&pmf(&[1.0]), &pmf(&[0.0, 0.0, 0.0, 1.0])), 3.0);
        assert!((tv_distance(&b7, &b4) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling_bound(&[0.4, 0.2], &[0.4, 0.2]), 0.0);
        assert_eq!(coupling_bound(&[1.0], &[]), 1.0);
    }

    #[test]
    fn sampling_edge_cases_and_determinism() {
        let zeros = sample_counts(&[0.0; 5], 7, 200).unwrap();
        assert!(zeros.draws.iter().all(|&d| d == 0));
        let ones = sample_counts(&[1.0; 4], 7, 200).unwrap();
        assert!(ones.draws.iter().all(|&d| d == 4));
        let a = sample_counts(&[0.3, 0.6, 0.9], 42, 500).unwrap();
        let b = sample_counts(&[0.3, 0.6, 0.9], 42, 500).unwrap();
        assert_eq!(a, b);
        let c = sample_counts(&[0.3, 0.6, 0.9], 43, 500).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn restricted_spectrum_validity() {
        let g = gauss_legendre(16, 0.0, 1.0).unwrap();
        let op = DiscreteOperator::discretize(&|_: f64, _: f64| 1.0, &g).unwrap();
        let e = restricted_spectrum(&op).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0] - 1.0).abs() < 1e-14);
        let zero = DiscreteOperator::discretize(&|_: f64, _: f64| 0.0, &g).unwrap();
        assert!(restricted_spectrum(&zero).unwrap().is_empty());
        let big = DiscreteOperator::discretize(&|_: f64, _: f64| 1.5, &g).unwrap();
        assert!(matches!(restricted_spectrum(&big), Err(Error::Validity(_))));
    }

    #[test]
    fn gap_edges() {
        let airy = KernelSpec::limit(LimitFamily::Airy, 0.0, (-8.0, 12.0)).unwrap();
        assert_eq!(gap_cdf(GapKind::SoftLargest, &airy, 12.0).unwrap(), 1.0);
        let near = gap_cdf(GapKind::SoftLargest, &airy, 11.0).unwrap();
        assert!((near - 1.0).abs() < 1e-6);
        let bessel = KernelSpec::limit(LimitFamily::Bessel, 0.0, (0.0, 1.0)).unwrap();
        assert_eq!(gap_cdf(GapKind::HardLeast, &bessel, 0.0).unwrap(), 0.0);
        assert!(gap_cdf(GapKind::HardLeast, &bessel, 1e-6).unwrap() < 1e-6);
    }

    #[test]
    fn b0_is_exp_quarter() {
        let r = b0_match(1.0).unwrap();
        assert_eq!(r.matches, B0Match::ExpSOver4);
        assert!((r.gap_probability - 0.778_800_783_071_404_9).abs() < 1e-12);
    }
}
