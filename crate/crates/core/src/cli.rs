//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::FactorKind;
use crate::harness::{
    cell_norm, edge_cdf_compare, fit_loglog, parse_kv, parse_list, parse_pair, run_roc, sample_pair, selftest,
    factor_residual, CellStatus, EdgeRegime, ExperimentConfig, FitTarget, Nodes, RateFit, RateSeries, Regime, Rule,
};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::specfun::AIRY_DOMAIN;

#[derive(Parser, Debug)]
#[command(name = "meso-roc", version, about = "Kernel trace norms and convergence-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel evaluation.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Schatten norm of finite minus limiting operator.
    Norm(NormArgs),
    /// Rate-of-convergence series with a log-log fit.
    Roc(RocArgs),
    /// Extreme-eigenvalue CDFs, finite against limit.
    Gap(GapArgs),
    /// Shared-seed count samples of the finite and limiting processes.
    Sample(SampleArgs),
    /// Residual of a kernel factorization.
    FactorCheck(FactorArgs),
    /// Approximation scans and invariant checks.
    Selftest,
}

#[derive(Subcommand, Debug)]
enum KernelAction {
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
}

#[derive(Args, Debug)]
struct NormArgs {
    #[arg(long)]
    regime: String,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    set: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, default_value = "auto")]
    nodes: String,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

#[derive(Args, Debug)]
struct RocArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    set: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a_rule: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b_rule: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[arg(long)]
    regime: String,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    s_grid: String,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    regime: String,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    set: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long)]
    draws: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FactorArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
}

/// Record of one `roc` run, written next to its CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub config_kv: String,
    pub tool_version: String,
    pub timestamp: u64,
    pub cells: Vec<ManifestCell>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub n: usize,
    pub status: CellStatus,
    pub note: String,
    pub eig_range: (f64, f64),
    pub det_finite: f64,
    pub det_limit: f64,
}

/// Fit block written as `<out>.fit.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBlock {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub per_point_residuals: Vec<f64>,
    pub w1: Option<RateFit>,
    pub error: Option<String>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validity(_) | Error::Degenerate(_) | Error::NotConverged(_) | Error::GridMismatch(_) => 2,
        Error::BelowThreshold(_) => 3,
        _ => 1,
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Kernel { action: KernelAction::Eval(a) } => kernel_eval(a, out),
        Command::Norm(a) => norm(a, out),
        Command::Roc(a) => roc(a, out),
        Command::Gap(a) => gap(a, out),
        Command::Sample(a) => sample(a, out),
        Command::FactorCheck(a) => factor_check(a, out),
        Command::Selftest => run_selftest(out),
    }
}

fn parse_family(s: &str) -> Result<KernelFamily> {
    Ok(match s {
        "sine" => KernelFamily::Sine,
        "airy" => KernelFamily::Airy,
        "bessel" => KernelFamily::Bessel,
        "cd_bulk_gue" => KernelFamily::CdBulkGue,
        "cd_hard_lue" => KernelFamily::CdHardLue,
        "cd_soft_gue" => KernelFamily::CdSoftGue,
        "cd_soft_lue" => KernelFamily::CdSoftLue,
        "cd_soft_jue" => KernelFamily::CdSoftJue,
        _ => return Err(Error::Config(format!("unknown kernel family '{s}'"))),
    })
}

fn parse_factor_kind(s: &str) -> Result<FactorKind> {
    Ok(match s {
        "sine_cs" => FactorKind::SineCs,
        "gue_bulk" => FactorKind::GueBulk,
        "lue_hard" => FactorKind::LueHard,
        "bessel" => FactorKind::Bessel,
        _ => return Err(Error::Config(format!("unknown factorization '{s}'"))),
    })
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn kernel_eval(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let family = parse_family(&a.family)?;
    let (mut lo, mut hi) = (a.x.min(a.y), a.x.max(a.y));
    if lo == hi {
        if hi + 1.0 <= AIRY_DOMAIN.1 {
            hi += 1.0;
        } else {
            lo -= 1.0;
        }
    }
    let spec = if family.is_limit() {
        KernelSpec::limit(family.limit(), a.a, (lo, hi))?
    } else {
        let n = a.n.ok_or_else(|| Error::Config(format!("--n is required for {}", a.family)))?;
        let regime = match family {
            KernelFamily::CdBulkGue => Regime::GueBulk,
            KernelFamily::CdHardLue => Regime::LueHard,
            KernelFamily::CdSoftGue => Regime::GueSoft,
            KernelFamily::CdSoftLue => Regime::LueSoft,
            _ => Regime::JueSoft,
        };
        regime.kernel(n, a.a, a.b, (lo, hi))?
    };
    writeln!(out, "{:?}", spec.eval(a.x, a.y)?)?;
    Ok(0)
}

fn rules(regime: Regime, a: Option<&str>, b: Option<&str>) -> Result<(Rule, Rule)> {
    let (da, db) = regime.default_rules();
    Ok((a.map(str::parse).transpose()?.unwrap_or(da), b.map(str::parse).transpose()?.unwrap_or(db)))
}

fn norm(a: NormArgs, out: &mut dyn Write) -> Result<i32> {
    let regime: Regime = a.regime.parse()?;
    let set = a.set.as_deref().map(parse_pair).transpose()?.unwrap_or(regime.default_set());
    let (ra, rb) = rules(regime, a.a.as_deref(), a.b.as_deref())?;
    let nodes: Nodes = a.nodes.parse()?;
    let v = cell_norm(regime, a.n, ra.at(a.n), rb.at(a.n), set, nodes, a.p)?;
    writeln!(out, "{v:?}")?;
    Ok(0)
}

fn roc_config(a: &RocArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut map: BTreeMap<String, String> = match &a.config {
        Some(p) => parse_kv(&fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("regime", a.regime.clone()),
        ("n_list", a.n_list.clone()),
        ("set", a.set.clone()),
        ("a_rule", a.a_rule.clone()),
        ("b_rule", a.b_rule.clone()),
        ("nodes", a.nodes.clone()),
        ("seed", a.seed.map(|s| s.to_string())),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    let out = map.remove("out").map(PathBuf::from).ok_or_else(|| Error::Config("--out is required".into()))?;
    Ok((ExperimentConfig::from_map(&map)?, out))
}

/// `r.csv` -> `r.<suffix>`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

/// CSV body of a series: header plus one ordered row per cell.
pub fn series_csv(series: &RateSeries) -> String {
    let mut s = String::from("regime,n,nodes,trace_norm,w1,status\n");
    for c in &series.cells {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            series.regime,
            c.n,
            c.nodes,
            num(c.trace_norm),
            num(c.w1),
            c.status.name()
        ));
    }
    s
}

fn roc(a: RocArgs, out: &mut dyn Write) -> Result<i32> {
    let (config, path) = roc_config(&a)?;
    let series = run_roc(&config)?;
    let fit_path = sidecar(&path, "fit.json");
    let manifest_path = sidecar(&path, "manifest.json");
    write_file(&path, &series_csv(&series))?;

    let fit = fit_loglog(&series, FitTarget::Trace);
    let block = match &fit {
        Ok(f) => FitBlock {
            slope: Some(f.slope),
            intercept: Some(f.intercept),
            r_squared: Some(f.r_squared),
            per_point_residuals: f.per_point_residuals.clone(),
            w1: fit_loglog(&series, FitTarget::W1).ok(),
            error: None,
        },
        Err(e) => FitBlock {
            slope: None,
            intercept: None,
            r_squared: None,
            per_point_residuals: vec![],
            w1: None,
            error: Some(e.to_string()),
        },
    };
    write_file(&fit_path, &(serde_json::to_string_pretty(&block).map_err(|e| Error::Io(e.to_string()))? + "\n"))?;

    let manifest = RunManifest {
        config: config.clone(),
        config_kv: config.to_kv(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        cells: series
            .cells
            .iter()
            .map(|c| ManifestCell {
                n: c.n,
                status: c.status,
                note: c.note.clone(),
                eig_range: c.eig_range,
                det_finite: c.det_finite,
                det_limit: c.det_limit,
            })
            .collect(),
        outputs: vec![path.clone(), fit_path.clone(), manifest_path.clone()],
    };
    write_file(&manifest_path, &(serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))? + "\n"))?;

    match &fit {
        Ok(f) => writeln!(out, "{} slope {:.4} r^2 {:.6}", config.regime, f.slope, f.r_squared)?,
        Err(e) => writeln!(out, "{} no fit: {e}", config.regime)?,
    }
    for c in series.cells.iter().filter(|c| !c.status.usable()) {
        writeln!(out, "N={} {}: {}", c.n, c.status.name(), c.note)?;
    }
    let below = series.cells.iter().any(|c| c.status == CellStatus::BelowThreshold);
    Ok(if series.any_invalid() {
        2
    } else if fit.is_err() {
        if below {
            3
        } else {
            2
        }
    } else {
        0
    })
}

fn gap(a: GapArgs, out: &mut dyn Write) -> Result<i32> {
    let regime: EdgeRegime = a.regime.parse()?;
    let (da, db) = regime.default_rules();
    let ra = a.a.as_deref().map(str::parse).transpose()?.unwrap_or(da);
    let rb = a.b.as_deref().map(str::parse).transpose()?.unwrap_or(db);
    let grid = parse_list::<f64>(&a.s_grid)?;
    let rows = edge_cdf_compare(regime, ra, rb, &grid, a.n)?;
    let mut body = String::from("s,finite_cdf,limit_cdf,abs_diff\n");
    for r in &rows {
        body.push_str(&format!("{},{},{},{}\n", num(r.s), num(r.finite_cdf), num(r.limit_cdf), num(r.abs_diff)));
    }
    write_file(&a.out, &body)?;
    writeln!(out, "{} rows written to {}", rows.len(), a.out.display())?;
    Ok(0)
}

fn sample(a: SampleArgs, out: &mut dyn Write) -> Result<i32> {
    let regime: Regime = a.regime.parse()?;
    let set = a.set.as_deref().map(parse_pair).transpose()?.unwrap_or(regime.default_set());
    let (ra, rb) = rules(regime, a.a.as_deref(), a.b.as_deref())?;
    let s = sample_pair(regime, a.n, ra.at(a.n), rb.at(a.n), set, a.draws, a.seed)?;
    let mut body = String::from("draw,finite_count,limit_count\n");
    for (i, (f, l)) in s.finite.iter().zip(&s.limit).enumerate() {
        body.push_str(&format!("{i},{f},{l}\n"));
    }
    write_file(&a.out, &body)?;
    let cost = if a.draws == 0 {
        0.0
    } else {
        s.finite.iter().zip(&s.limit).map(|(f, l)| f.abs_diff(*l) as f64).sum::<f64>() / a.draws as f64
    };
    writeln!(out, "mean |count difference| {cost:?}, coupling bound {:?}", s.coupling_bound)?;
    Ok(0)
}

fn factor_check(a: FactorArgs, out: &mut dyn Write) -> Result<i32> {
    let kind = parse_factor_kind(&a.kind)?;
    let r = factor_residual(kind, a.n, a.a, a.s)?;
    writeln!(out, "{r:?}")?;
    Ok(0)
}

fn run_selftest(out: &mut dyn Write) -> Result<i32> {
    let checks = selftest();
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 2 })
}
