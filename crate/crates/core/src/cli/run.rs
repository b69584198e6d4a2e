use std::fs;
use std::io::Write;
use std::path::PathBuf;

use super::config::{ExperimentKind, RunConfig};
use super::svg::{line_chart, Series};
use crate::erwvrp::{doob_decompose, ErwvrpParams};
use crate::error::{invalid, Result};
use crate::fractal::FractalFunction;
use crate::limits::{
    blocks_experiment, chung_experiment, clt_experiment, functional_clt_experiment, lil_experiment,
    modulus_experiment, variance_profile,
};
use crate::params;
use crate::point::TorusPoint;
use crate::report::{Check, ExperimentReport, Table};
use crate::stats::normal_cdf;
use crate::weights::DIVERGENCE_SLOPE;

/// A finished experiment plus the directory holding its files.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub dir: PathBuf,
    /// Function value, for `eval`.
    pub value: Option<f64>,
}

impl RunOutcome {
    /// 0 if every check passes, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            2
        }
    }
}

/// Runs the experiment inside a pool of `cfg.workers` threads.
pub fn execute(cfg: &RunConfig) -> Result<(ExperimentReport, Option<f64>)> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        builder = builder.num_threads(cfg.workers);
    }
    let pool = builder.build().map_err(|e| invalid(format!("thread pool: {e}")))?;
    let (mut report, value) = pool.install(|| dispatch(cfg))?;
    report.manifest.config_hash = cfg.config_hash();
    Ok((report, value))
}

fn walk_params(cfg: &RunConfig, horizon: usize) -> Result<ErwvrpParams> {
    ErwvrpParams::new(cfg.p, cfg.weight_sequence()?, horizon)
}

fn dispatch(cfg: &RunConfig) -> Result<(ExperimentReport, Option<f64>)> {
    let seq = cfg.weight_sequence()?;
    let report = match cfg.experiment {
        ExperimentKind::Eval => return eval(cfg),
        ExperimentKind::Simulate => simulate(cfg)?,
        ExperimentKind::Blocks => {
            blocks_experiment(&walk_params(cfg, 1)?, cfg.delta, cfg.blocks, cfg.replicas, cfg.seed, &cfg.gordin_options())?
        }
        ExperimentKind::Clt => clt_experiment(&walk_params(cfg, cfg.n)?, cfg.n, cfg.replicas, cfg.seed)?,
        ExperimentKind::Lil => {
            lil_experiment(&walk_params(cfg, cfg.n)?, cfg.n, cfg.replicas, cfg.seed, cfg.normalization)?
        }
        ExperimentKind::Chung => chung_experiment(&walk_params(cfg, cfg.n)?, cfg.n, cfg.replicas, cfg.seed)?,
        ExperimentKind::Modulus => {
            let top = *cfg.levels.last().expect("validated non-empty");
            let profile = variance_profile(cfg.r, &seq, top as usize)?;
            let grid =
                cfg.levels.iter().map(|&m| TorusPoint::inverse_power(cfg.r, m)).collect::<Result<Vec<_>>>()?;
            modulus_experiment(&FractalFunction::new(cfg.r, seq)?, &profile, &grid, cfg.samples, cfg.seed)?
        }
        ExperimentKind::Fclt => {
            let profile = variance_profile(cfg.r, &seq, cfg.n)?;
            functional_clt_experiment(
                &FractalFunction::new(cfg.r, seq)?,
                &profile,
                cfg.beta,
                cfg.n,
                &cfg.t,
                cfg.samples,
                cfg.seed,
            )?
        }
        ExperimentKind::ValidateWeights => validate_weights(cfg)?,
    };
    Ok((report, None))
}

fn eval(cfg: &RunConfig) -> Result<(ExperimentReport, Option<f64>)> {
    let f = FractalFunction::new(cfg.r, cfg.weight_sequence()?)?;
    let e = f.eval(&cfg.x, cfg.eps)?;
    let mut report = ExperimentReport::new(
        "eval",
        params! {"r" => cfg.r, "weights" => cfg.weights.to_string(), "x" => cfg.x.to_string(), "eps" => cfg.eps},
        cfg.seed,
        1,
    );
    report.check(Check::info("f(x)", e.value));
    report.check(Check::at_most("certified error", e.certified_error, cfg.eps));
    report.check(Check::info("terms", e.terms as f64));
    Ok((report, Some(e.value)))
}

/// One path on stream 0 with its Doob decomposition.
fn simulate(cfg: &RunConfig) -> Result<ExperimentReport> {
    let params = walk_params(cfg, cfg.n)?;
    let path = params.simulate(cfg.seed, 0);
    let doob = doob_decompose(&params, &path)?;
    let mut report = ExperimentReport::new(
        "simulate",
        params! {"p" => cfg.p, "weights" => cfg.weights.to_string(), "n" => cfg.n},
        cfg.seed,
        1,
    );
    let max_a = params.weights().values(cfg.n).iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let budget = 64.0 * f64::EPSILON * cfg.n as f64 * max_a / (1.0 - params.alpha());
    report.check(Check::at_most("max Doob residual", doob.max_abs_residual(), budget));
    let s2 = params.cumulative_variances(cfg.n)[cfg.n];
    report.check(Check::info("S_n", path.sums[cfg.n]));
    report.check(Check::info("s_n^2", s2));
    let mut t = Table::new("path", &["k", "X_k", "S_k"]);
    for k in 0..=cfg.n {
        t.push(vec![k as f64, path.sign(k) as f64, path.sums[k]]);
    }
    report.table(t);
    Ok(report)
}

fn validate_weights(cfg: &RunConfig) -> Result<ExperimentReport> {
    let seq = cfg.weight_sequence()?;
    let a = seq.validate_assumptions(cfg.delta, cfg.n)?;
    let g = seq.growth_report(cfg.delta, cfg.q, 1, cfg.n)?;
    let mut report = ExperimentReport::new(
        "validate-weights",
        params! {"weights" => cfg.weights.to_string(), "delta" => cfg.delta, "n_max" => cfg.n, "q" => cfg.q},
        cfg.seed,
        1,
    );
    report.check(Check::below("K_hat finite", if a.k_hat.is_finite() { 0.0 } else { 1.0 }, 0.5));
    report.check(Check::at_most(
        "trailing log-log slope of a_n^2 / A_n^(1-delta)",
        a.trailing_slope.unwrap_or(0.0),
        DIVERGENCE_SLOPE,
    ));
    report.check(Check::info("K_hat", a.k_hat));
    report.check(Check::info("worst index", a.worst_index as f64));
    report.check(Check::info("sup A_n / n^(1/delta)", g.sup_polynomial_ratio));
    report.check(Check::info("polynomial growth holds", g.polynomial_pass as u8 as f64));
    report.check(Check::info("exponential growth holds from n0 = 1", g.exponential_pass as u8 as f64));
    if let Some(n0) = g.min_admissible_n0 {
        report.check(Check::info("smallest admissible n0", n0 as f64));
    }
    let energy = seq.energies(cfg.n);
    let mut t = Table::new("energy", &["n", "a_n", "A_n"]);
    for (n, e) in energy.iter().enumerate().skip(1) {
        t.push(vec![n as f64, seq.weight(n), *e]);
    }
    report.table(t);
    Ok(report)
}

/// Writes `report.json`, `config.txt`, one CSV per table and optional SVGs
/// under `<out>/<experiment>/<hash>/`.
pub fn persist(cfg: &RunConfig, report: &ExperimentReport) -> Result<PathBuf> {
    let dir = cfg.out.join(cfg.experiment.name()).join(report.manifest.short_hash());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("config.txt"), cfg.canonical())?;
    for t in &report.tables {
        t.write_csv(fs::File::create(dir.join(format!("{}.csv", t.name)))?)?;
    }
    if cfg.svg {
        for (name, svg) in plots(report) {
            fs::write(dir.join(format!("{name}.svg")), svg)?;
        }
    }
    Ok(dir)
}

fn column(t: &Table, name: &str) -> Option<usize> {
    t.columns.iter().position(|c| c == name)
}

fn xy(t: &Table, x: &str, y: &str) -> Vec<(f64, f64)> {
    match (column(t, x), column(t, y)) {
        (Some(i), Some(j)) => t.rows.iter().map(|r| (r[i], r[j])).collect(),
        _ => Vec::new(),
    }
}

fn plots(report: &ExperimentReport) -> Vec<(&'static str, String)> {
    let table = |name: &str| report.tables.iter().find(|t| t.name == name);
    let mut out = Vec::new();
    if let Some(t) = table("samples") {
        let mut v: Vec<f64> = t.rows.iter().map(|r| r[1]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let ecdf = v.iter().enumerate().map(|(i, x)| (*x, (i + 1) as f64 / n)).collect();
        let normal = v.iter().map(|x| (*x, normal_cdf(*x))).collect();
        out.push((
            "ecdf",
            line_chart(
                "empirical CDF vs N(0,1)",
                "S_n / s_n",
                &[Series { label: "empirical", points: ecdf }, Series { label: "normal", points: normal }],
            ),
        ));
    }
    if let Some(t) = table("trace") {
        out.push((
            "running_max",
            line_chart(
                "running max, replica 0",
                "n",
                &[
                    Series { label: "walk", points: xy(t, "n", "walk_running_max") },
                    Series { label: "oracle", points: xy(t, "n", "oracle_running_max") },
                ],
            ),
        ));
    }
    if let Some(t) = table("covariances") {
        let diag: Vec<&Vec<f64>> = t.rows.iter().filter(|r| r[0] == r[1]).collect();
        out.push((
            "variance",
            line_chart(
                "marginal variance",
                "t",
                &[
                    Series { label: "empirical", points: diag.iter().map(|r| (r[1], r[2])).collect() },
                    Series { label: "brownian", points: diag.iter().map(|r| (r[1], r[3])).collect() },
                ],
            ),
        ));
    }
    if let Some(t) = table("path") {
        out.push(("path", line_chart("S_k", "k", &[Series { label: "walk", points: xy(t, "k", "S_k") }])));
    }
    out
}

/// Executes, persists and prints one verdict line per check.
pub fn run(cfg: &RunConfig, out: &mut impl Write) -> Result<RunOutcome> {
    let (report, value) = execute(cfg)?;
    let dir = persist(cfg, &report)?;
    if let Some(v) = value {
        writeln!(out, "{v}")?;
    }
    for c in &report.checks {
        writeln!(out, "{c}")?;
    }
    writeln!(out, "{} {}", if report.passed() { "PASS" } else { "FAIL" }, dir.display())?;
    Ok(RunOutcome { report, dir, value })
}
