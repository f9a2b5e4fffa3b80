//! Rate-of-convergence experiments: trace norms and count distances between
//! scaled finite-N kernels and their limits, across N.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx;
use crate::error::{Error, Result};
use crate::factor::{build_factors, verify_factorization, FactorKind};
use crate::kernels::{EnsembleParams, KernelFamily, KernelSpec, SOFT_EDGE_CUTOFF};
use crate::nystrom::{
    default_nodes, det_from_eigenvalues, gauss_legendre, symmetric_spectrum, trace_norm, DiscreteOperator,
};
use crate::pointcount::{
    count_pmf, coupling_bound, gap_cdf, restricted_spectrum, sample_counts, tv_distance,
    w1_counts, GapKind,
};
use crate::specfun::AIRY_DOMAIN;

/// Relative change in the trace norm that counts as grid-converged.
pub const GRID_TOL: f64 = 5e-3;

/// Doublings tried before a cell is reported as not converged.
const MAX_DOUBLINGS: usize = 4;

/// Eigenvalue slack recorded as valid in a cell.
pub const EIG_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GueBulk,
    LueHard,
    GueSoft,
    LueSoft,
    JueSoft,
}

impl Regime {
    pub const ALL: [Regime; 5] =
        [Regime::GueBulk, Regime::LueHard, Regime::GueSoft, Regime::LueSoft, Regime::JueSoft];

    pub fn name(self) -> &'static str {
        match self {
            Regime::GueBulk => "gue_bulk",
            Regime::LueHard => "lue_hard",
            Regime::GueSoft => "gue_soft",
            Regime::LueSoft => "lue_soft",
            Regime::JueSoft => "jue_soft",
        }
    }

    pub fn family(self) -> KernelFamily {
        match self {
            Regime::GueBulk => KernelFamily::CdBulkGue,
            Regime::LueHard => KernelFamily::CdHardLue,
            Regime::GueSoft => KernelFamily::CdSoftGue,
            Regime::LueSoft => KernelFamily::CdSoftLue,
            Regime::JueSoft => KernelFamily::CdSoftJue,
        }
    }

    /// The full interval `I` of the regime at `s = 1` (soft: `[0, T]`).
    pub fn default_set(self) -> (f64, f64) {
        match self {
            Regime::GueBulk => (-1.0, 1.0),
            Regime::LueHard => (0.0, 1.0),
            _ => (0.0, SOFT_EDGE_CUTOFF),
        }
    }

    pub fn default_rules(self) -> (Rule, Rule) {
        match self {
            Regime::JueSoft => (Rule::Scaled { alpha: 1.0, round: Rounding::Floor }, Rule::Scaled {
                alpha: 0.5,
                round: Rounding::Ceil,
            }),
            _ => (Rule::Const(0.0), Rule::Const(0.0)),
        }
    }

    pub fn is_soft(self) -> bool {
        matches!(self, Regime::GueSoft | Regime::LueSoft | Regime::JueSoft)
    }

    /// Checks `set` against the regime's admissible window.
    pub fn check_set(self, (lo, hi): (f64, f64)) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid set [{lo}, {hi}]")));
        }
        let ok = match self {
            Regime::GueBulk => true,
            Regime::LueHard => lo >= 0.0,
            _ => lo >= AIRY_DOMAIN.0 && hi <= SOFT_EDGE_CUTOFF,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("set [{lo}, {hi}] outside the {} window", self.name())))
        }
    }

    pub fn kernel(self, n: usize, a: f64, b: f64, set: (f64, f64)) -> Result<KernelSpec> {
        let params = match self {
            Regime::GueBulk | Regime::GueSoft => EnsembleParams::gue(n),
            Regime::LueHard | Regime::LueSoft => EnsembleParams::lue(n, a),
            Regime::JueSoft => EnsembleParams::jue(n, a, b),
        };
        KernelSpec::finite(self.family(), params, set)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown regime '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Floor,
    Ceil,
}

/// Ensemble parameter as a function of `N`: a constant or `round(alpha N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Const(f64),
    Scaled { alpha: f64, round: Rounding },
}

impl Rule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            Rule::Const(c) => c,
            Rule::Scaled { alpha, round: Rounding::Floor } => (alpha * n as f64).floor(),
            Rule::Scaled { alpha, round: Rounding::Ceil } => (alpha * n as f64).ceil(),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Const(c) => write!(f, "{c:?}"),
            Rule::Scaled { alpha, round } => {
                let r = if *round == Rounding::Floor { "floor" } else { "ceil" };
                write!(f, "{r}({alpha:?}N)")
            }
        }
    }
}

fn parse_scaled(s: &str) -> Option<f64> {
    let body = s.strip_suffix('N')?.trim().trim_end_matches('*').trim();
    if body.is_empty() {
        Some(1.0)
    } else {
        body.parse().ok()
    }
}

impl FromStr for Rule {
    type Err = Error;

    /// Accepts `2`, `N`, `0.5N`, `0.5*N`, `floor(0.5N)` and `ceil(0.5*N)`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Config(format!("cannot parse parameter rule '{s}'"));
        let (round, inner) = if let Some(r) = t.strip_prefix("floor(").and_then(|r| r.strip_suffix(')')) {
            (Some(Rounding::Floor), r)
        } else if let Some(r) = t.strip_prefix("ceil(").and_then(|r| r.strip_suffix(')')) {
            (Some(Rounding::Ceil), r)
        } else {
            (None, t.as_str())
        };
        if let Some(alpha) = parse_scaled(inner) {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(bad());
            }
            return Ok(Rule::Scaled { alpha, round: round.unwrap_or(Rounding::Floor) });
        }
        match (round, inner.parse::<f64>()) {
            (None, Ok(c)) if c.is_finite() => Ok(Rule::Const(c)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nodes {
    Auto,
    Fixed(usize),
}

impl fmt::Display for Nodes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nodes::Auto => f.write_str("auto"),
            Nodes::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for Nodes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Nodes::Auto),
            t => match t.parse::<usize>() {
                Ok(k) if k > 0 => Ok(Nodes::Fixed(k)),
                _ => Err(Error::Config(format!("nodes must be 'auto' or a positive integer, got '{s}'"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub n_values: Vec<usize>,
    pub set: (f64, f64),
    pub a: Rule,
    pub b: Rule,
    pub nodes: Nodes,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults of `regime` on `n_values`.
    pub fn new(regime: Regime, n_values: Vec<usize>) -> Self {
        let (a, b) = regime.default_rules();
        Self { regime, n_values, set: regime.default_set(), a, b, nodes: Nodes::Auto, seed: 0 }
    }

    pub fn with_a(mut self, a: Rule) -> Self {
        self.a = a;
        self
    }

    pub fn with_b(mut self, b: Rule) -> Self {
        self.b = b;
        self
    }

    pub fn with_set(mut self, set: (f64, f64)) -> Self {
        self.set = set;
        self
    }

    pub fn with_nodes(mut self, nodes: Nodes) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.len() < 4 {
            return Err(Error::Config(format!("need at least 4 values of N, got {}", self.n_values.len())));
        }
        if self.n_values[0] == 0 || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("N values must be positive and strictly increasing".into()));
        }
        for &n in &self.n_values {
            let (a, b) = (self.a.at(n), self.b.at(n));
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                return Err(Error::Config(format!("rules give a={a}, b={b} at N={n}; both must be nonnegative")));
            }
        }
        self.regime.check_set(self.set)
    }

    /// `key = value` lines; parses back with [`ExperimentConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let ns: Vec<String> = self.n_values.iter().map(|n| n.to_string()).collect();
        format!(
            "regime = {}\nn_list = {}\nset = {:?},{:?}\na_rule = {}\nb_rule = {}\nnodes = {}\nseed = {}\n",
            self.regime,
            ns.join(","),
            self.set.0,
            self.set.1,
            self.a,
            self.b,
            self.nodes,
            self.seed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        Self::from_map(&parse_kv(text)?)
    }

    /// Builds a config from already-merged `key = value` pairs.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let regime: Regime = get("regime").ok_or_else(|| Error::Config("missing 'regime'".into()))?.parse()?;
        let n_values = parse_list::<usize>(get("n_list").ok_or_else(|| Error::Config("missing 'n_list'".into()))?)?;
        let mut cfg = ExperimentConfig::new(regime, n_values);
        if let Some(s) = get("set") {
            cfg.set = parse_pair(s)?;
        }
        if let Some(s) = get("a_rule") {
            cfg.a = s.parse()?;
        }
        if let Some(s) = get("b_rule") {
            cfg.b = s.parse()?;
        }
        if let Some(s) = get("nodes") {
            cfg.nodes = s.parse()?;
        }
        if let Some(s) = get("seed") {
            cfg.seed = s.trim().parse().map_err(|_| Error::Config(format!("seed must be a u64, got '{s}'")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Config(format!("bad list entry '{t}' in '{s}'"))))
        .collect()
}

pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    match parse_list::<f64>(s)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::Config(format!("expected 'lo,hi', got '{s}'"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    NotConverged,
    BelowThreshold,
    Invalid,
    Failed,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NotConverged => "not_converged",
            CellStatus::BelowThreshold => "below_threshold",
            CellStatus::Invalid => "invalid",
            CellStatus::Failed => "failed",
        }
    }

    /// Whether the cell enters fits.
    pub fn usable(self) -> bool {
        matches!(self, CellStatus::Ok | CellStatus::NotConverged)
    }
}

/// One `(regime, N)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
    pub trace_norm: f64,
    pub w1: f64,
    pub coupling: f64,
    /// Smallest and largest raw eigenvalue over both operators.
    pub eig_range: (f64, f64),
    pub det_finite: f64,
    pub det_limit: f64,
    pub status: CellStatus,
    pub note: String,
}

impl CellReport {
    fn failed(n: usize, a: f64, b: f64, status: CellStatus, note: String) -> Self {
        Self {
            n,
            a,
            b,
            nodes: 0,
            trace_norm: f64::NAN,
            w1: f64::NAN,
            coupling: f64::NAN,
            eig_range: (f64::NAN, f64::NAN),
            det_finite: f64::NAN,
            det_limit: f64::NAN,
            status,
            note,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub regime: Regime,
    /// Sorted by `N`.
    pub cells: Vec<CellReport>,
}

impl RateSeries {
    fn usable(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| c.status.usable())
    }

    pub fn n_values(&self) -> Vec<usize> {
        self.usable().map(|c| c.n).collect()
    }

    pub fn trace_norms(&self) -> Vec<f64> {
        self.usable().map(|c| c.trace_norm).collect()
    }

    pub fn w1_values(&self) -> Vec<f64> {
        self.usable().map(|c| c.w1).collect()
    }

    pub fn grid_nodes_used(&self) -> Vec<usize> {
        self.usable().map(|c| c.nodes).collect()
    }

    /// Cells where the count distance exceeds the trace norm.
    pub fn count_bound_violations(&self) -> Vec<usize> {
        self.usable().filter(|c| c.w1 > c.trace_norm + 1e-8).map(|c| c.n).collect()
    }

    pub fn any_invalid(&self) -> bool {
        self.cells.iter().any(|c| c.status == CellStatus::Invalid)
    }
}

struct Measurement {
    trace_norm: f64,
    w1: f64,
    coupling: f64,
    eig_range: (f64, f64),
    det_finite: f64,
    det_limit: f64,
}

fn measure(finite: &KernelSpec, limit: &KernelSpec, nodes: usize) -> Result<Measurement> {
    let (lo, hi) = finite.interval;
    let grid = gauss_legendre(nodes, lo, hi)?;
    let op = DiscreteOperator::discretize(finite, &grid)?;
    let lim = DiscreteOperator::discretize(limit, &grid)?;
    let trace_norm = trace_norm(&(&op.matrix - &lim.matrix));
    let raw1 = symmetric_spectrum(&op.matrix).eigenvalues;
    let raw2 = symmetric_spectrum(&lim.matrix).eigenvalues;
    let lo_eig = raw1.last().copied().unwrap_or(0.0).min(raw2.last().copied().unwrap_or(0.0));
    let hi_eig = raw1.first().copied().unwrap_or(0.0).max(raw2.first().copied().unwrap_or(0.0));
    let e1 = restricted_spectrum(&op)?;
    let e2 = restricted_spectrum(&lim)?;
    Ok(Measurement {
        trace_norm,
        w1: w1_counts(&count_pmf(&e1), &count_pmf(&e2)),
        coupling: coupling_bound(&e1, &e2),
        eig_range: (lo_eig, hi_eig),
        det_finite: det_from_eigenvalues(&raw1),
        det_limit: det_from_eigenvalues(&raw2),
    })
}

fn run_cell(
    regime: Regime,
    n: usize,
    a: f64,
    b: f64,
    config: &ExperimentConfig,
    build: &(dyn Fn(usize, f64, f64) -> Result<KernelSpec> + Sync),
) -> CellReport {
    let below = |e: &Error| regime == Regime::JueSoft && matches!(e, Error::Parameter(_) | Error::Domain(_));
    let classify = |e: Error| {
        let status = match e {
            Error::Validity(_) => CellStatus::Invalid,
            ref e if below(e) => CellStatus::BelowThreshold,
            _ => CellStatus::Failed,
        };
        CellReport::failed(n, a, b, status, e.to_string())
    };
    let kernels = build(n, a, b).and_then(|f| Ok((f.limit_counterpart()?, f)));
    let (limit, finite) = match kernels {
        Ok(k) => k,
        Err(e) => return classify(e),
    };
    let (lo, hi) = config.set;
    let (nodes, m, status) = match config.nodes {
        Nodes::Fixed(k) => match measure(&finite, &limit, k) {
            Ok(m) => (k, m, CellStatus::Ok),
            Err(e) => return classify(e),
        },
        Nodes::Auto => {
            let mut k = default_nodes(lo, hi);
            let mut prev = match measure(&finite, &limit, k) {
                Ok(m) => m,
                Err(e) => return classify(e),
            };
            let mut status = CellStatus::NotConverged;
            for _ in 0..MAX_DOUBLINGS {
                let next = match measure(&finite, &limit, 2 * k) {
                    Ok(m) => m,
                    Err(e) => return classify(e),
                };
                k *= 2;
                let change = (next.trace_norm - prev.trace_norm).abs();
                prev = next;
                if change <= GRID_TOL * prev.trace_norm.abs() {
                    status = CellStatus::Ok;
                    break;
                }
            }
            (k, prev, status)
        }
    };
    let valid = m.eig_range.0 >= -EIG_SLACK && m.eig_range.1 <= 1.0 + EIG_SLACK;
    let (status, note) = if !valid {
        (CellStatus::Invalid, format!("eigenvalues span [{:e}, {:e}]", m.eig_range.0, m.eig_range.1))
    } else if status == CellStatus::NotConverged {
        (status, format!("trace norm still moving after {k} nodes", k = nodes))
    } else {
        (status, String::new())
    };
    CellReport {
        n,
        a,
        b,
        nodes,
        trace_norm: m.trace_norm,
        w1: m.w1,
        coupling: m.coupling,
        eig_range: m.eig_range,
        det_finite: m.det_finite,
        det_limit: m.det_limit,
        status,
        note,
    }
}

fn run_with(
    config: &ExperimentConfig,
    build: &(dyn Fn(usize, f64, f64) -> Result<KernelSpec> + Sync),
) -> Result<RateSeries> {
    config.validate()?;
    let regime = config.regime;
    let mut cells: Vec<CellReport> = config
        .n_values
        .par_iter()
        .map(|&n| run_cell(regime, n, config.a.at(n), config.b.at(n), config, build))
        .collect();
    cells.sort_by_key(|c| c.n);
    Ok(RateSeries { regime, cells })
}

/// Trace norms and count distances across `config.n_values`.
pub fn run_roc(config: &ExperimentConfig) -> Result<RateSeries> {
    let (regime, set) = (config.regime, config.set);
    run_with(config, &move |n, a, b| regime.kernel(n, a, b, set))
}

/// The same pipeline with the finite kernel replaced by the limit itself.
pub fn run_self_comparison(config: &ExperimentConfig) -> Result<RateSeries> {
    let (regime, set) = (config.regime, config.set);
    run_with(config, &move |n, a, b| regime.kernel(n, a, b, set)?.limit_counterpart())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    Trace,
    W1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub per_point_residuals: Vec<f64>,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::Degenerate(format!("need at least 4 points, got {}", xs.len().min(ys.len()))));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Degenerate(format!("log-log fit needs positive finite values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let per_point_residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = per_point_residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, per_point_residuals })
}

/// Log-log fit of the usable cells of a series.
pub fn fit_loglog(series: &RateSeries, target: FitTarget) -> Result<RateFit> {
    let ns: Vec<f64> = series.n_values().iter().map(|&n| n as f64).collect();
    let ys = match target {
        FitTarget::Trace => series.trace_norms(),
        FitTarget::W1 => series.w1_values(),
    };
    fit_power_law(&ns, &ys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRegime {
    HardLeast,
    GueSoft,
    LueSoft,
    JueSoft,
}

impl EdgeRegime {
    pub fn name(self) -> &'static str {
        match self {
            EdgeRegime::HardLeast => "hard_least",
            EdgeRegime::GueSoft => "gue_soft",
            EdgeRegime::LueSoft => "lue_soft",
            EdgeRegime::JueSoft => "jue_soft",
        }
    }

    fn regime(self) -> Regime {
        match self {
            EdgeRegime::HardLeast => Regime::LueHard,
            EdgeRegime::GueSoft => Regime::GueSoft,
            EdgeRegime::LueSoft => Regime::LueSoft,
            EdgeRegime::JueSoft => Regime::JueSoft,
        }
    }

    pub fn default_rules(self) -> (Rule, Rule) {
        self.regime().default_rules()
    }
}

impl FromStr for EdgeRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [EdgeRegime::HardLeast, EdgeRegime::GueSoft, EdgeRegime::LueSoft, EdgeRegime::JueSoft]
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown edge regime '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCdfRow {
    pub s: f64,
    pub finite_cdf: f64,
    pub limit_cdf: f64,
    pub abs_diff: f64,
}

/// Finite-N and limiting extreme-eigenvalue CDFs on `s_grid`.
pub fn edge_cdf_compare(regime: EdgeRegime, a: Rule, b: Rule, s_grid: &[f64], n: usize) -> Result<Vec<EdgeCdfRow>> {
    let (av, bv) = (a.at(n), b.at(n));
    s_grid
        .par_iter()
        .map(|&s| {
            if !s.is_finite() {
                return Err(Error::Domain(format!("gap point {s} must be finite")));
            }
            let (kind, set) = match regime {
                EdgeRegime::HardLeast => (GapKind::HardLeast, (0.0, s.max(1.0))),
                _ => {
                    if s < AIRY_DOMAIN.0 {
                        return Err(Error::Domain(format!("gap point {s} below {}", AIRY_DOMAIN.0)));
                    }
                    (GapKind::SoftLargest, (s.min(SOFT_EDGE_CUTOFF - 1.0), SOFT_EDGE_CUTOFF))
                }
            };
            let finite = regime.regime().kernel(n, av, bv, set)?;
            let limit = finite.limit_counterpart()?;
            let f = gap_cdf(kind, &finite, s)?;
            let l = gap_cdf(kind, &limit, s)?;
            Ok(EdgeCdfRow { s, finite_cdf: f, limit_cdf: l, abs_diff: (f - l).abs() })
        })
        .collect()
}

/// Shared-seed count samples of the finite and limiting processes on `set`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub finite: Vec<usize>,
    pub limit: Vec<usize>,
    pub coupling_bound: f64,
}

pub fn sample_pair(
    regime: Regime,
    n: usize,
    a: f64,
    b: f64,
    set: (f64, f64),
    draws: usize,
    seed: u64,
) -> Result<PairedSample> {
    regime.check_set(set)?;
    let finite = regime.kernel(n, a, b, set)?;
    let limit = finite.limit_counterpart()?;
    let grid = gauss_legendre(2 * default_nodes(set.0, set.1), set.0, set.1)?;
    let e1 = restricted_spectrum(&DiscreteOperator::discretize(&finite, &grid)?)?;
    let e2 = restricted_spectrum(&DiscreteOperator::discretize(&limit, &grid)?)?;
    Ok(PairedSample {
        finite: sample_counts(&e1, seed, draws)?.draws,
        limit: sample_counts(&e2, seed, draws)?.draws,
        coupling_bound: coupling_bound(&e1, &e2),
    })
}

/// Schatten `p`-norm of the finite-minus-limit operator for one cell.
pub fn cell_norm(regime: Regime, n: usize, a: f64, b: f64, set: (f64, f64), nodes: Nodes, p: f64) -> Result<f64> {
    regime.check_set(set)?;
    let finite = regime.kernel(n, a, b, set)?;
    let limit = finite.limit_counterpart()?;
    let norm_at = |k: usize| -> Result<f64> {
        let grid = gauss_legendre(k, set.0, set.1)?;
        let d = DiscreteOperator::discretize(&finite, &grid)?.difference(&DiscreteOperator::discretize(&limit, &grid)?)?;
        crate::nystrom::schatten_norm(&d, p)
    };
    match nodes {
        Nodes::Fixed(k) => norm_at(k),
        Nodes::Auto => {
            let mut k = default_nodes(set.0, set.1);
            let mut prev = norm_at(k)?;
            for _ in 0..MAX_DOUBLINGS {
                k *= 2;
                let next = norm_at(k)?;
                let done = (next - prev).abs() <= GRID_TOL * next.abs();
                prev = next;
                if done {
                    break;
                }
            }
            Ok(prev)
        }
    }
}

/// Factorization residual on the default grid of the identity's interval.
pub fn factor_residual(kind: FactorKind, n: usize, a: f64, s: f64) -> Result<f64> {
    let fs = build_factors(kind, n, a, s)?;
    let (lo, hi) = fs.interval();
    let grid = gauss_legendre(2 * default_nodes(lo, hi), lo, hi)?;
    verify_factorization(&fs, &grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> SelfCheck {
    match f() {
        Ok((passed, detail)) => SelfCheck { name: name.into(), passed, detail },
        Err(e) => SelfCheck { name: name.into(), passed: false, detail: e.to_string() },
    }
}

/// Approximation scans and quick invariant checks.
pub fn selftest() -> Vec<SelfCheck> {
    let mut out = Vec::new();
    out.push(check("hermite_cosine_envelope", || {
        let ns: Vec<usize> = (2..=1024).step_by(31).chain([1024]).collect();
        let xs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let env = approx::hermite_cosine_envelope(&ns, &xs, false)?;
        let spot = approx::hermite_cosine_residual(1024, 3.0)? * 1024.0 <= approx::hermite_cosine_residual(4, 3.0)? * 4.0;
        let ok = env.sup().is_finite() && env.dominates() && env.coefficients.iter().all(|c| *c >= 0.0) && spot;
        Ok((ok, format!("sup {:.4e}, cubic {:?}", env.sup(), env.coefficients)))
    }));
    out.push(check("laguerre_expansion", || {
        let scan = approx::laguerre_expansion_scan(&[64, 128, 256, 512, 1024], 1.0, 4.0)?;
        let ratio = scan.max_scaled() / scan.min_scaled();
        Ok((ratio < 10.0, format!("n^3 residual spread {ratio:.3}")))
    }));
    out.push(check("stirling", || {
        let ok = (1..=200u64).all(|n| matches!(approx::stirling_check(n), Ok((true, true))));
        Ok((ok, "n = 1..200".into()))
    }));
    out.push(check("normalization_bracket", || {
        let mut ok = true;
        for n in 2..=400 {
            let (lo, hi) = approx::normalization_bracket(n);
            let v = approx::normalization_constant(n)?;
            ok &= v >= lo - 1e-12 && v <= hi + 1e-12;
        }
        Ok((ok, "n = 2..400".into()))
    }));
    out.push(check("factorizations", || {
        let mut worst: f64 = 0.0;
        worst = worst.max(factor_residual(FactorKind::SineCs, 0, 0.0, 1.0)?);
        for a in [0.0, 1.0, 2.0] {
            worst = worst.max(factor_residual(FactorKind::Bessel, 0, a, 1.0)?);
        }
        for n in [8, 16] {
            worst = worst.max(factor_residual(FactorKind::GueBulk, n, 0.0, 1.0)?);
            worst = worst.max(factor_residual(FactorKind::LueHard, n, 1.0, 1.0)?);
        }
        Ok((worst <= 1e-8, format!("max residual {worst:.3e}")))
    }));
    out.push(check("count_laws", || {
        let sine = KernelSpec::limit(crate::kernels::LimitFamily::Sine, 0.0, (-1.0, 1.0))?;
        let op = DiscreteOperator::discretize(&sine, &gauss_legendre(64, -1.0, 1.0)?)?;
        let e = restricted_spectrum(&op)?;
        let p = count_pmf(&e);
        let mean: f64 = e.iter().sum();
        let var: f64 = e.iter().map(|l| l * (1.0 - l)).sum();
        let q = count_pmf(&e[1..]);
        let ok = (p.mean() - mean).abs() < 1e-8
            && (p.variance() - var).abs() < 1e-8
            && tv_distance(&p, &q) <= w1_counts(&p, &q) + 1e-12
            && w1_counts(&p, &q) <= coupling_bound(&e, &e[1..]) + 1e-12;
        Ok((ok, format!("mean {mean:.6}, variance {var:.6}")))
    }));
    out.push(check("self_comparison", || {
        let cfg = ExperimentConfig::new(Regime::GueBulk, vec![8, 16, 32, 64]).with_nodes(Nodes::Fixed(40));
        let s = run_self_comparison(&cfg)?;
        let worst = s.cells.iter().map(|c| c.trace_norm).fold(0.0, f64::max);
        Ok((worst <= 1e-10, format!("max norm {worst:.3e}")))
    }));
    out.push(check("count_bound", || {
        let cfg = ExperimentConfig::new(Regime::GueBulk, vec![16, 32, 64, 128]);
        let s = run_roc(&cfg)?;
        let v = s.count_bound_violations();
        Ok((v.is_empty() && !s.any_invalid(), format!("{} violations", v.len())))
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_parsing() {
        assert_eq!("0".parse::<Rule>().unwrap(), Rule::Const(0.0));
        assert_eq!("N".parse::<Rule>().unwrap(), Rule::Scaled { alpha: 1.0, round: Rounding::Floor });
        let r: Rule = "ceil(0.5N)".parse().unwrap();
        assert_eq!(r.at(7), 4.0);
        assert_eq!("floor(0.5 * N)".parse::<Rule>().unwrap().at(7), 3.0);
        assert_eq!("2N".parse::<Rule>().unwrap().at(3), 6.0);
        for s in ["x", "ceil(2)", "-1N", "N2"] {
            assert!(s.parse::<Rule>().is_err(), "{s}");
        }
        for r in [Rule::Const(1.25), Rule::Scaled { alpha: 0.1, round: Rounding::Ceil }] {
            assert_eq!(r.to_string().parse::<Rule>().unwrap(), r);
        }
    }

    #[test]
    fn config_validation_and_kv() {
        let cfg = ExperimentConfig::new(Regime::JueSoft, vec![10, 20, 30, 40]);
        assert_eq!(ExperimentConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        assert!(ExperimentConfig::new(Regime::GueBulk, vec![1, 2, 3]).validate().is_err());
        assert!(ExperimentConfig::new(Regime::GueBulk, vec![1, 3, 2, 4]).validate().is_err());
        let bad = ExperimentConfig::new(Regime::LueHard, vec![1, 2, 3, 4]).with_set((-1.0, 1.0));
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ExperimentConfig::new(Regime::GueSoft, vec![1, 2, 3, 4]).with_set((0.0, 13.0));
        assert!(bad.validate().is_err());
        assert!(parse_kv("no equals sign").is_err());
    }

    #[test]
    fn exact_power_laws() {
        let ns = [8.0, 16.0, 32.0, 64.0, 128.0];
        let f = fit_power_law(&ns, &ns.map(|n| 3.0 / n)).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        let f = fit_power_law(&ns, &ns.map(|n| 1.0 / (n * n))).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(matches!(fit_power_law(&ns, &[1.0, 0.0, 1.0, 1.0, 1.0]), Err(Error::Degenerate(_))));
        assert!(matches!(fit_power_law(&ns[..3], &[1.0, 1.0, 1.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn self_comparison_vanishes() {
        for regime in [Regime::GueBulk, Regime::LueHard, Regime::GueSoft] {
            let cfg = ExperimentConfig::new(regime, vec![8, 16, 32, 64]).with_nodes(Nodes::Fixed(48));
            let s = run_self_comparison(&cfg).unwrap();
            assert!(s.cells.iter().all(|c| c.trace_norm <= 1e-10 && c.w1 <= 1e-10), "{regime}");
        }
    }

    #[test]
    fn bulk_series_decreases() {
        let s = run_roc(&ExperimentConfig::new(Regime::GueBulk, vec![16, 32, 64, 128])).unwrap();
        assert!(s.cells.iter().all(|c| c.status == CellStatus::Ok));
        assert!(s.trace_norms().windows(2).all(|w| w[1] < w[0]));
        assert!(s.count_bound_violations().is_empty());
        assert!(s.cells.iter().all(|c| c.w1 <= c.coupling + 1e-9));
    }

    #[test]
    fn edge_trivial_points() {
        let rows = edge_cdf_compare(EdgeRegime::GueSoft, Rule::Const(0.0), Rule::Const(0.0), &[12.0], 64).unwrap();
        assert!((rows[0].finite_cdf - 1.0).abs() < 1e-6 && rows[0].abs_diff <= 1e-6);
        let rows =
            edge_cdf_compare(EdgeRegime::HardLeast, Rule::Const(0.0), Rule::Const(0.0), &[0.0, 1e-6], 32).unwrap();
        assert!(rows.iter().all(|r| r.finite_cdf < 1e-5 && r.limit_cdf < 1e-5 && r.abs_diff < 1e-8));
    }
}
