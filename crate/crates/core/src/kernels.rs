//! Scalar kernels of the unitary ensembles and their limits.
//!
//! Every kernel here has the integrable form
//! `K(x, y) = sqrt(j(x) j(y)) * c * (h(x) l(y) - l(x) h(y)) / (t(x) - t(y))`
//! for some point map `t` with Jacobian `j` and two nodal functions `h`, `l`.
//! Limiting kernels are evaluated in that form. Finite-N kernels are evaluated
//! as projection sums `sum_{k<N} f_k(t(x)) f_k(t(y))`, which do not cancel near
//! the diagonal; their integrable form stays available through
//! [`KernelSpec::eval_integrable`].

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{airy, bessel_j_pair, OrthoFamily, AIRY_DOMAIN};

/// Right end of the truncated soft-edge window `[s, T]`.
pub const SOFT_EDGE_CUTOFF: f64 = 12.0;

/// Pairs closer than this are evaluated on the diagonal at their midpoint.
const NEAR_DIAGONAL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Gue,
    Lue,
    Jue,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub kind: Ensemble,
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl EnsembleParams {
    pub fn gue(n: usize) -> Self {
        Self { kind: Ensemble::Gue, n, a: 0.0, b: 0.0 }
    }

    pub fn lue(n: usize, a: f64) -> Self {
        Self { kind: Ensemble::Lue, n, a, b: 0.0 }
    }

    pub fn jue(n: usize, a: f64, b: f64) -> Self {
        Self { kind: Ensemble::Jue, n, a, b }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("matrix size N must be positive".into()));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self.kind {
            Ensemble::Gue => Ok(()),
            Ensemble::Lue if ok(self.a) => Ok(()),
            Ensemble::Jue if ok(self.a) && ok(self.b) => Ok(()),
            _ => Err(Error::Parameter(format!(
                "ensemble parameters must be finite and nonnegative, got a={}, b={}",
                self.a, self.b
            ))),
        }
    }

    fn family(&self) -> OrthoFamily {
        match self.kind {
            Ensemble::Gue => OrthoFamily::Hermite,
            Ensemble::Lue => OrthoFamily::Laguerre { a: self.a },
            Ensemble::Jue => OrthoFamily::Jacobi { a: self.a, b: self.b },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Affine,
    /// `t(x) = tanh(mu + sigma x)`; `u`, `v` are the centre and width at degree N.
    Tanh { u: f64, v: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftEdgeScaling {
    pub mu: f64,
    pub sigma: f64,
    pub map: MapKind,
}

impl SoftEdgeScaling {
    /// `(t(x), t'(x))`.
    pub fn apply(&self, x: f64) -> (f64, f64) {
        let z = self.mu + self.sigma * x;
        match self.map {
            MapKind::Affine => (z, self.sigma),
            MapKind::Tanh { .. } => {
                let t = z.tanh();
                (t, self.sigma * (1.0 - t * t))
            }
        }
    }
}

fn lue_tilde(n: f64, m: f64) -> (f64, f64) {
    let (rn, rm) = ((n + 0.5).sqrt(), (m + 0.5).sqrt());
    let mu = (rn + rm).powi(2);
    let sigma = (rn + rm) * (1.0 / rn + 1.0 / rm).cbrt();
    (mu, sigma)
}

/// `(u, v)` of the tanh-scaled JUE edge at degree `n`.
fn jue_centre(n: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let kappa = a + b + 2.0 * n + 1.0;
    let (cphi, ctheta) = ((a - b) / kappa, (a + b) / kappa);
    if !(-1.0..=1.0).contains(&cphi) || !(-1.0..=1.0).contains(&ctheta) {
        return Err(Error::Parameter(format!(
            "JUE angles undefined for N={n}, a={a}, b={b}"
        )));
    }
    let (phi, theta) = (cphi.acos(), ctheta.acos());
    let x = -(phi + theta).cos();
    let denom = kappa * kappa * phi.sin() * theta.sin();
    if !(denom > 0.0) || x.abs() >= 1.0 {
        return Err(Error::Parameter(format!(
            "JUE soft edge degenerate for N={n}, a={a}, b={b}"
        )));
    }
    let y = (2.0 * (phi + theta).sin().powi(4) / denom).cbrt();
    Ok((x.atanh(), y / (1.0 - x * x)))
}

/// Soft-edge centring and scale of the given ensemble.
pub fn soft_scaling(params: &EnsembleParams) -> Result<SoftEdgeScaling> {
    params.validate()?;
    let nf = params.n as f64;
    match params.kind {
        Ensemble::Gue => Ok(SoftEdgeScaling {
            mu: 0.5 * ((2.0 * nf + 1.0).sqrt() + (2.0 * nf - 1.0).sqrt()),
            sigma: std::f64::consts::FRAC_1_SQRT_2 * nf.powf(-1.0 / 6.0),
            map: MapKind::Affine,
        }),
        Ensemble::Lue => {
            let a = params.a;
            let (m1, s1) = lue_tilde(nf - 1.0, nf + a);
            let (m2, s2) = lue_tilde(nf, nf + a - 1.0);
            let gamma = m1 * s2.sqrt() / (m2 * s1.sqrt());
            let mu = (1.0 / s1.sqrt() + 1.0 / s2.sqrt())
                / (1.0 / (m1 * s1.sqrt()) + 1.0 / (m2 * s2.sqrt()));
            let sigma = (1.0 + gamma) / (1.0 / s1 + gamma / s2);
            Ok(SoftEdgeScaling { mu, sigma, map: MapKind::Affine })
        }
        Ensemble::Jue => {
            if params.n < 2 {
                return Err(Error::Parameter("JUE soft edge needs N >= 2".into()));
            }
            let (u1, v1) = jue_centre(nf, params.a, params.b)?;
            let (u0, v0) = jue_centre(nf - 1.0, params.a, params.b)?;
            let mu = (u1 / v1 + u0 / v0) / (1.0 / v1 + 1.0 / v0);
            let sigma = 2.0 / (1.0 / v1 + 1.0 / v0);
            Ok(SoftEdgeScaling { mu, sigma, map: MapKind::Tanh { u: u1, v: v1 } })
        }
    }
}

/// Hard-edge factor `tau_N = 1 - a/(2N)`.
pub fn hard_edge_tau(n: usize, a: f64) -> Result<f64> {
    let tau = 1.0 - a / (2.0 * n as f64);
    if tau > 0.0 {
        Ok(tau)
    } else {
        Err(Error::Parameter(format!("tau_N = {tau} must be positive (N={n}, a={a})")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    CdBulkGue,
    CdHardLue,
    CdSoftGue,
    CdSoftLue,
    CdSoftJue,
    Sine,
    Airy,
    Bessel,
}

impl KernelFamily {
    pub fn is_limit(self) -> bool {
        matches!(self, KernelFamily::Sine | KernelFamily::Airy | KernelFamily::Bessel)
    }

    /// The limit each finite family converges to.
    pub fn limit(self) -> LimitFamily {
        match self {
            KernelFamily::CdBulkGue | KernelFamily::Sine => LimitFamily::Sine,
            KernelFamily::CdHardLue | KernelFamily::Bessel => LimitFamily::Bessel,
            _ => LimitFamily::Airy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitFamily {
    Sine,
    Airy,
    Bessel,
}

impl From<LimitFamily> for KernelFamily {
    fn from(f: LimitFamily) -> Self {
        match f {
            LimitFamily::Sine => KernelFamily::Sine,
            LimitFamily::Airy => KernelFamily::Airy,
            LimitFamily::Bessel => KernelFamily::Bessel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelParams {
    Ensemble(EnsembleParams),
    Limit { a: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PointMap {
    Affine { mu: f64, sigma: f64 },
    Tanh { mu: f64, sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Evaluator {
    Cd { family: OrthoFamily, n: usize, coef: f64, map: PointMap },
    Sine,
    Airy,
    Bessel { a: f64 },
}

/// Nodal data of an integrable kernel at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeValue {
    pub t: f64,
    pub jac: f64,
    pub hi: f64,
    pub lo: f64,
    pub diag: f64,
}

/// A concrete kernel on an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub params: KernelParams,
    pub interval: (f64, f64),
    eval: Evaluator,
}

impl KernelSpec {
    /// A scaled finite-N kernel.
    pub fn finite(family: KernelFamily, params: EnsembleParams, interval: (f64, f64)) -> Result<Self> {
        params.validate()?;
        check_interval(interval)?;
        let n = params.n;
        let nf = n as f64;
        let expect = match family {
            KernelFamily::CdBulkGue | KernelFamily::CdSoftGue => Ensemble::Gue,
            KernelFamily::CdHardLue | KernelFamily::CdSoftLue => Ensemble::Lue,
            KernelFamily::CdSoftJue => Ensemble::Jue,
            _ => {
                return Err(Error::Parameter(format!("{family:?} is not a finite-N family")));
            }
        };
        if params.kind != expect {
            return Err(Error::Parameter(format!(
                "{family:?} needs a {expect:?} ensemble, got {:?}",
                params.kind
            )));
        }
        let map = match family {
            KernelFamily::CdBulkGue => PointMap::Affine {
                mu: 0.0,
                sigma: std::f64::consts::PI / (2.0 * nf).sqrt(),
            },
            KernelFamily::CdHardLue => {
                let tau = hard_edge_tau(n, params.a)?;
                if interval.0 < 0.0 {
                    return Err(Error::Domain("hard-edge interval must lie in [0, inf)".into()));
                }
                PointMap::Affine { mu: 0.0, sigma: tau / (4.0 * nf) }
            }
            _ => {
                let sc = soft_scaling(&params)?;
                match sc.map {
                    MapKind::Affine => PointMap::Affine { mu: sc.mu, sigma: sc.sigma },
                    MapKind::Tanh { .. } => PointMap::Tanh { mu: sc.mu, sigma: sc.sigma },
                }
            }
        };
        let fam = params.family();
        Ok(Self {
            family,
            params: KernelParams::Ensemble(params),
            interval,
            eval: Evaluator::Cd { family: fam, n, coef: fam.off_diag(n), map },
        })
    }

    /// A limiting kernel; `a` is the Bessel parameter and ignored otherwise.
    pub fn limit(family: LimitFamily, a: f64, interval: (f64, f64)) -> Result<Self> {
        check_interval(interval)?;
        let eval = match family {
            LimitFamily::Sine => Evaluator::Sine,
            LimitFamily::Airy => {
                if interval.0 < AIRY_DOMAIN.0 || interval.1 > AIRY_DOMAIN.1 {
                    return Err(Error::Domain(format!(
                        "Airy kernel interval {interval:?} leaves [{}, {}]",
                        AIRY_DOMAIN.0, AIRY_DOMAIN.1
                    )));
                }
                Evaluator::Airy
            }
            LimitFamily::Bessel => {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::Parameter(format!("Bessel parameter must be >= 0, got {a}")));
                }
                if interval.0 < 0.0 {
                    return Err(Error::Domain("Bessel kernel lives on [0, inf)".into()));
                }
                Evaluator::Bessel { a }
            }
        };
        Ok(Self {
            family: family.into(),
            params: KernelParams::Limit { a },
            interval,
            eval,
        })
    }

    /// The limiting kernel of this finite kernel on the same interval.
    pub fn limit_counterpart(&self) -> Result<Self> {
        let a = match self.params {
            KernelParams::Ensemble(p) => p.a,
            KernelParams::Limit { a } => a,
        };
        KernelSpec::limit(self.family.limit(), a, self.interval)
    }

    /// The same kernel on a different interval.
    pub fn restrict(&self, interval: (f64, f64)) -> Result<Self> {
        check_interval(interval)?;
        match self.eval {
            Evaluator::Airy if interval.0 < AIRY_DOMAIN.0 || interval.1 > AIRY_DOMAIN.1 => {
                return Err(Error::Domain(format!("Airy kernel interval {interval:?} out of range")));
            }
            Evaluator::Bessel { .. } if interval.0 < 0.0 => {
                return Err(Error::Domain("Bessel kernel lives on [0, inf)".into()));
            }
            Evaluator::Cd { family: OrthoFamily::Laguerre { .. }, map: PointMap::Affine { mu, .. }, .. }
                if mu == 0.0 && interval.0 < 0.0 =>
            {
                return Err(Error::Domain("hard-edge interval must lie in [0, inf)".into()));
            }
            _ => {}
        }
        Ok(Self { interval, ..*self })
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.interval;
        x >= lo - 1e-12 * (1.0 + lo.abs()) && x <= hi + 1e-12 * (1.0 + hi.abs())
    }

    fn coef(&self) -> f64 {
        match self.eval {
            Evaluator::Cd { coef, .. } => coef,
            Evaluator::Sine => 1.0 / std::f64::consts::PI,
            Evaluator::Airy => 1.0,
            Evaluator::Bessel { .. } => 0.5,
        }
    }

    /// Nodal data at `x`.
    fn check_point(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{x} outside kernel interval {:?}", self.interval)))
        }
    }

    pub fn node(&self, x: f64) -> Result<NodeValue> {
        self.check_point(x)?;
        match self.eval {
            Evaluator::Cd { family, n, map, .. } => {
                let (t, jac) = map.apply(x)?;
                let v = family.evaluate(n, t)?;
                Ok(NodeValue { t, jac, hi: v.upper, lo: v.lower, diag: jac * v.cd_diagonal })
            }
            Evaluator::Sine => {
                let (s, c) = (std::f64::consts::PI * x).sin_cos();
                Ok(NodeValue { t: x, jac: 1.0, hi: s, lo: c, diag: 1.0 })
            }
            Evaluator::Airy => {
                let (ai, aip) = airy(x)?;
                Ok(NodeValue { t: x, jac: 1.0, hi: ai, lo: aip, diag: aip * aip - x * ai * ai })
            }
            Evaluator::Bessel { a } => {
                let u = x.max(0.0).sqrt();
                let (ja, ja1) = bessel_j_pair(a, u)?;
                let diag = if u == 0.0 {
                    if a == 0.0 {
                        0.25
                    } else {
                        0.0
                    }
                } else {
                    0.25 * (ja * ja + ja1 * ja1 - 2.0 * a / u * ja * ja1)
                };
                Ok(NodeValue { t: x, jac: 1.0, hi: u * ja1, lo: ja, diag })
            }
        }
    }

    fn combine(&self, p: &NodeValue, q: &NodeValue) -> f64 {
        (p.jac * q.jac).sqrt() * self.coef() * (p.hi * q.lo - p.lo * q.hi) / (p.t - q.t)
    }

    /// `K(x, x)`.
    pub fn diagonal(&self, x: f64) -> Result<f64> {
        Ok(self.node(x)?.diag)
    }

    /// `sqrt(j(x)) f_k(t(x))` for `k < N`; finite kernels only.
    fn projection_row(&self, x: f64) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let Evaluator::Cd { family, n, map, .. } = self.eval else {
            return Err(Error::Parameter(format!("{:?} has no projection form", self.family)));
        };
        let (t, jac) = map.apply(x)?;
        let sj = jac.sqrt();
        Ok(family.functions(n, t)?.into_iter().map(|f| sj * f).collect())
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if matches!(self.eval, Evaluator::Cd { .. }) {
            let (p, q) = (self.projection_row(x)?, self.projection_row(y)?);
            return Ok(p.iter().zip(&q).map(|(u, v)| u * v).sum());
        }
        self.eval_integrable(x, y)
    }

    /// `K(x, y)` through the integrable quotient, with the diagonal formula
    /// for pairs closer than `1e-6`.
    pub fn eval_integrable(&self, x: f64, y: f64) -> Result<f64> {
        let p = self.node(x)?;
        if x == y {
            return Ok(p.diag);
        }
        let q = self.node(y)?;
        if (x - y).abs() < NEAR_DIAGONAL {
            return self.diagonal(0.5 * (x + y));
        }
        Ok(self.combine(&p, &q))
    }

    /// Kernel matrix `K(x_i, x_j)` on the given nodes.
    pub fn matrix(&self, nodes: &[f64]) -> Result<DMatrix<f64>> {
        let n = nodes.len();
        if let Evaluator::Cd { n: degree, .. } = self.eval {
            let rows: Vec<Vec<f64>> = nodes.par_iter().map(|&x| self.projection_row(x)).collect::<Result<_>>()?;
            let phi = DMatrix::from_fn(n, degree, |i, k| rows[i][k]);
            let m = &phi * phi.transpose();
            return Ok((&m + m.transpose()) * 0.5);
        }
        let vals: Vec<NodeValue> = nodes.par_iter().map(|&x| self.node(x)).collect::<Result<_>>()?;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = vals[i].diag;
            for j in 0..i {
                let v = if (nodes[i] - nodes[j]).abs() < NEAR_DIAGONAL {
                    self.diagonal(0.5 * (nodes[i] + nodes[j]))?
                } else {
                    self.combine(&vals[i], &vals[j])
                };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

impl PointMap {
    /// `(t(x), t'(x))`.
    fn apply(self, x: f64) -> Result<(f64, f64)> {
        match self {
            PointMap::Affine { mu, sigma } => Ok((mu + sigma * x, sigma)),
            PointMap::Tanh { mu, sigma } => {
                let t = (mu + sigma * x).tanh();
                if t.abs() >= 1.0 {
                    return Err(Error::Domain(format!("mapped point tanh({}) left (-1, 1)", mu + sigma * x)));
                }
                Ok((t, sigma * (1.0 - t * t)))
            }
        }
    }
}

fn check_interval((lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::Parameter(format!("invalid interval [{lo}, {hi}]")))
    }
}

/// Limiting kernel on its natural domain.
pub fn limit_kernel(family: LimitFamily, a: f64, x: f64, y: f64) -> Result<f64> {
    let interval = match family {
        LimitFamily::Sine => (f64::MIN, f64::MAX),
        LimitFamily::Airy => AIRY_DOMAIN,
        LimitFamily::Bessel => (0.0, f64::MAX),
    };
    KernelSpec::limit(family, a, interval)?.eval(x, y)
}

/// Finite-N kernel value; `spec` must be one of the `cd_*` families.
pub fn finite_kernel(spec: &KernelSpec, x: f64, y: f64) -> Result<f64> {
    if spec.family.is_limit() {
        return Err(Error::Parameter(format!("{:?} is a limiting family", spec.family)));
    }
    spec.eval(x, y)
}

/// Anything that evaluates pointwise and as a Nyström matrix.
pub trait Kernel: Sync {
    fn eval(&self, x: f64, y: f64) -> Result<f64>;

    fn matrix(&self, nodes: &[f64]) -> Result<DMatrix<f64>> {
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

impl Kernel for KernelSpec {
    fn eval(&self, x: f64, y: f64) -> Result<f64> {
        KernelSpec::eval(self, x, y)
    }

    fn matrix(&self, nodes: &[f64]) -> Result<DMatrix<f64>> {
        KernelSpec::matrix(self, nodes)
    }
}

impl<F> Kernel for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self(x, y))
    }
}
