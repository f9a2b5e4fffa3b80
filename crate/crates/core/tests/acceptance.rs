//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use meso_roc::approx::{hermite_cosine_envelope, hermite_cosine_residual, laguerre_expansion_scan};
use meso_roc::factor::FactorKind;
use meso_roc::harness::{
    edge_cdf_compare, factor_residual, fit_loglog, fit_power_law, run_roc, EdgeRegime, ExperimentConfig, FitTarget,
    RateSeries, Regime, Rounding, Rule, EIG_SLACK,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Run {
    label: &'static str,
    series: RateSeries,
    elapsed: Duration,
}

fn run(label: &'static str, config: ExperimentConfig) -> Run {
    let t = Instant::now();
    let series = run_roc(&config).unwrap_or_else(|e| panic!("{label}: {e}"));
    Run { label, series, elapsed: t.elapsed() }
}

fn slope_check(r: &Run, lo: f64, hi: f64, min_r2: Option<f64>) -> (bool, String) {
    match fit_loglog(&r.series, FitTarget::Trace) {
        Ok(f) => {
            let ok = (lo..=hi).contains(&f.slope) && min_r2.is_none_or(|m| f.r_squared >= m);
            (ok, format!("{} slope {:.4} r2 {:.5}", r.label, f.slope, f.r_squared))
        }
        Err(e) => (false, format!("{} no fit: {e}", r.label)),
    }
}

fn rate(runs: &[&Run], lo: f64, hi: f64, min_r2: Option<f64>, budget: Duration) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    let mut total = Duration::ZERO;
    for r in runs {
        let (ok, s) = slope_check(r, lo, hi, min_r2);
        passed &= ok;
        parts.push(s);
        total += r.elapsed;
    }
    passed &= total < budget;
    parts.push(format!("{:.1}s", total.as_secs_f64()));
    outcome(passed, parts.join("; "))
}

fn count_bound(runs: &[&Run]) -> Outcome {
    let mut cells = 0;
    let mut bad = Vec::new();
    for r in runs {
        cells += r.series.cells.len();
        if r.series.cells.iter().any(|c| !c.status.usable()) {
            bad.push(format!("{} has unusable cells", r.label));
        }
        for n in r.series.count_bound_violations() {
            bad.push(format!("{} N={n}", r.label));
        }
    }
    outcome(bad.is_empty(), format!("{cells} cells, violations {bad:?}"))
}

fn validity(runs: &[&Run]) -> Outcome {
    let (mut lo, mut hi, mut dlo, mut dhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut cells = 0;
    for r in runs {
        for c in &r.series.cells {
            cells += 1;
            lo = lo.min(c.eig_range.0);
            hi = hi.max(c.eig_range.1);
            for d in [c.det_finite, c.det_limit] {
                dlo = dlo.min(d);
                dhi = dhi.max(d);
            }
        }
    }
    let ok = lo >= -EIG_SLACK && hi <= 1.0 + EIG_SLACK && dlo >= 0.0 && dhi <= 1.0 + EIG_SLACK;
    outcome(ok, format!("{cells} cells, eigenvalues [{lo:.3e}, {hi:.6}], determinants [{dlo:.3e}, {dhi:.6}]"))
}

fn factorizations() -> Outcome {
    let mut cases = vec![(FactorKind::SineCs, 0, 0.0)];
    cases.extend([0.0, 1.0, 2.0].map(|a| (FactorKind::Bessel, 0, a)));
    cases.extend([8, 16, 32].map(|n| (FactorKind::GueBulk, n, 0.0)));
    for a in [0.0, 1.0] {
        cases.extend([8, 16, 32].map(|n| (FactorKind::LueHard, n, a)));
    }
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for &(kind, n, a) in &cases {
        match factor_residual(kind, n, a, 1.0) {
            Ok(r) => worst = worst.max(r),
            Err(e) => errors.push(format!("{kind:?} N={n} a={a}: {e}")),
        }
    }
    outcome(errors.is_empty() && worst <= 1e-8, format!("{} cases, max residual {worst:.3e} {errors:?}", cases.len()))
}

fn hermite_cosine() -> Outcome {
    let ns: Vec<usize> = (2..=1024).collect();
    let xs: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
    let env = match hermite_cosine_envelope(&ns, &xs, false) {
        Ok(e) => e,
        Err(e) => return outcome(false, e.to_string()),
    };
    let spot_hi = 1024.0 * hermite_cosine_residual(1024, 3.0).unwrap();
    let spot_lo = 4.0 * hermite_cosine_residual(4, 3.0).unwrap();
    let ok = env.sup().is_finite()
        && env.coefficients.iter().all(|c| *c >= 0.0)
        && env.dominates()
        && spot_hi <= spot_lo;
    outcome(
        ok,
        format!(
            "sup {:.4}, cubic {:?}, spot {:.4e} <= {:.4e}",
            env.sup(),
            env.coefficients.map(|c| (c * 1e6).round() / 1e6),
            spot_hi,
            spot_lo
        ),
    )
}

fn laguerre_expansion() -> Outcome {
    match laguerre_expansion_scan(&[64, 128, 256, 512, 1024], 1.0, 4.0) {
        Ok(s) => {
            let ratio = s.max_scaled() / s.min_scaled();
            outcome(ratio < 10.0, format!("n^3 residual in [{:.5}, {:.5}], ratio {ratio:.4}", s.min_scaled(), s.max_scaled()))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn edge(regime: EdgeRegime, s: f64, ns: &[usize], lo: f64, hi: f64) -> Outcome {
    let mut diffs = Vec::new();
    for &n in ns {
        match edge_cdf_compare(regime, Rule::Const(0.0), Rule::Const(0.0), &[s], n) {
            Ok(rows) => diffs.push(rows[0].abs_diff),
            Err(e) => return outcome(false, format!("N={n}: {e}")),
        }
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let shown: Vec<String> = diffs.iter().map(|d| format!("{d:.3e}")).collect();
    match fit_power_law(&xs, &diffs) {
        Ok(f) => outcome(
            (lo..=hi).contains(&f.slope),
            format!("{} s={s}: diffs [{}], slope {:.4}", regime.name(), shown.join(", "), f.slope),
        ),
        Err(e) => outcome(false, format!("{} s={s}: diffs [{}], no fit: {e}", regime.name(), shown.join(", "))),
    }
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("meso-roc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut bodies = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let path = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_meso-roc"))
            .args(["roc", "--regime", "gue_soft", "--n-list", "16,32,64,128", "--seed", "3", "--out"])
            .arg(&path)
            .output()
            .unwrap()
            .status;
        if !status.success() {
            return outcome(false, format!("roc exited with {status}"));
        }
        bodies.push(std::fs::read(&path).unwrap());
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(bodies[0] == bodies[1], format!("{} bytes", bodies[0].len()))
}

fn main() {
    let scaled = |alpha| Rule::Scaled { alpha, round: Rounding::Floor };
    let bulk = run("gue_bulk", ExperimentConfig::new(Regime::GueBulk, vec![64, 128, 256, 512]).with_set((-1.0, 1.0)));
    let hard: Vec<Run> = [("lue_hard a=0", 0.0), ("lue_hard a=1", 1.0)]
        .into_iter()
        .map(|(label, a)| {
            run(label, ExperimentConfig::new(Regime::LueHard, vec![32, 64, 128, 256]).with_a(Rule::Const(a)).with_set((0.0, 1.0)))
        })
        .collect();
    let soft_ns = vec![64, 128, 256, 512];
    let gue_soft = run("gue_soft", ExperimentConfig::new(Regime::GueSoft, soft_ns.clone()).with_set((0.0, 12.0)));
    let lue_soft: Vec<Run> = [("lue_soft gamma=1", Rule::Const(0.0)), ("lue_soft gamma=2", scaled(1.0))]
        .into_iter()
        .map(|(label, a)| run(label, ExperimentConfig::new(Regime::LueSoft, soft_ns.clone()).with_a(a).with_set((0.0, 12.0))))
        .collect();
    let jue_soft = run(
        "jue_soft alpha=1 beta=1/2",
        ExperimentConfig::new(Regime::JueSoft, soft_ns)
            .with_a(scaled(1.0))
            .with_b(Rule::Scaled { alpha: 0.5, round: Rounding::Ceil })
            .with_set((0.0, 12.0)),
    );

    let hard_refs: Vec<&Run> = hard.iter().collect();
    let mut soft_rest: Vec<&Run> = lue_soft.iter().collect();
    soft_rest.push(&jue_soft);
    let mut all: Vec<&Run> = vec![&bulk];
    all.extend(&hard);
    all.push(&gue_soft);
    all.extend(&soft_rest);

    let soft3 = {
        let mut g = rate(&[&gue_soft], -0.82, -0.52, None, Duration::from_secs(600));
        let rest = rate(&soft_rest, -0.87, -0.47, None, Duration::from_secs(600));
        let total: Duration = gue_soft.elapsed + soft_rest.iter().map(|r| r.elapsed).sum::<Duration>();
        g.passed &= rest.passed && total < Duration::from_secs(600);
        g.detail = format!("{}; {}; total {:.1}s", g.detail, rest.detail, total.as_secs_f64());
        g
    };

    let results = [
        ("1 gue bulk rate", rate(&[&bulk], -1.2, -0.8, Some(0.98), Duration::from_secs(120))),
        ("2 lue hard-edge rate", rate(&hard_refs, -2.3, -1.7, None, Duration::from_secs(120))),
        ("3 soft-edge rates", soft3),
        ("4 count distance below trace norm", count_bound(&all)),
        ("5 factorization identities", factorizations()),
        ("6 hermite-cosine envelope", hermite_cosine()),
        ("7 laguerre expansion order", laguerre_expansion()),
        ("8 soft-edge largest eigenvalue", edge(EdgeRegime::GueSoft, 0.0, &[64, 128, 256, 512], -0.9, -0.45)),
        ("8 hard-edge least eigenvalue", edge(EdgeRegime::HardLeast, 1.0, &[32, 64, 128, 256], -2.4, -1.6)),
        ("9 numerical validity", validity(&all)),
        ("10 roc determinism", determinism()),
    ];

    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
