use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::brownian_path;
use crate::erwvrp::{cumulative_second_moments, k_of_p, ErwvrpParams, SignWalker};
use crate::error::{invalid, Result};
use crate::params;
use crate::report::{Check, ExperimentReport, Table};
use crate::stats::{fraction_within, median, quantiles};
use crate::weights::WeightKind;

/// Brownian reference paths read streams `ORACLE_STREAM + i`.
pub const ORACLE_STREAM: u64 = 1 << 63;

pub const MIN_HORIZON: usize = 100_000;

/// Band for the running maximum under exact-variance scaling.
pub const EXACT_BAND: (f64, f64) = (0.5, 1.2);
pub const EXACT_BAND_FRACTION: f64 = 0.9;
/// Slack on the `sqrt(K(p))` upper bound under energy scaling.
pub const ENERGY_SLACK: f64 = 1.1;
pub const ENERGY_BAND_FRACTION: f64 = 0.95;
/// Allowed distance of the median running maximum from the closed-form
/// limsup for the odd-indicator weights.
pub const ODD_WEIGHTS_TOL: f64 = 0.3;
/// Every width-0.2 cell of `[-0.9, 0.9]` must be visited by this fraction of paths.
pub const COVERAGE_FRACTION: f64 = 0.8;
pub const CHUNG_MEDIAN_TOL: f64 = 0.15;
pub const CHUNG_BAND: (f64, f64) = (0.8, 1.4);
pub const CHUNG_BAND_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `s_n^2`.
    #[default]
    ExactVariance,
    /// `p/(1-p) A_n`.
    ScaledEnergy,
    /// `A_n`.
    Energy,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::ExactVariance => "exact_s",
            Normalization::ScaledEnergy => "scaled_a",
            Normalization::Energy => "energy",
        })
    }
}

impl FromStr for Normalization {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_s" | "exact" | "exact_variance" => Ok(Normalization::ExactVariance),
            "scaled_a" | "scaled_energy" => Ok(Normalization::ScaledEnergy),
            "energy" | "a" => Ok(Normalization::Energy),
            other => Err(invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

/// `sqrt((2p^2 - 2p + 1) / (2p(1-p)))`, the limsup for weights `1, 0, 1, 0, ...`
/// under energy scaling.
pub fn odd_weights_limsup(p: f64) -> f64 {
    ((2.0 * p * p - 2.0 * p + 1.0) / (2.0 * p * (1.0 - p))).sqrt()
}

struct Grid {
    /// `S_k` multiplier `1/sqrt(2 D_k log log D_k)` for `k >= start`.
    scale: Vec<f64>,
    start: usize,
    /// `s_1^2, ..., s_n^2`.
    times: Vec<f64>,
    weights: Vec<f64>,
}

fn grid(params: &ErwvrpParams, n_max: usize, denominators: impl Fn(&[f64], usize) -> f64) -> Result<Grid> {
    if n_max < MIN_HORIZON {
        return Err(invalid(format!("n_max must be at least {MIN_HORIZON}, got {n_max}")));
    }
    let weights = params.weights().values(n_max);
    let s2 = cumulative_second_moments(params.alpha(), &weights);
    let e2 = E * E;
    let d: Vec<f64> = (0..=n_max).map(|n| denominators(&s2, n)).collect();
    let start = (1..=n_max)
        .find(|&n| d[n] > e2)
        .ok_or_else(|| invalid("denominator never exceeds e^2 within the horizon"))?;
    let scale = d.iter().enumerate().map(|(n, &dn)| if n >= start { 1.0 / (2.0 * dn * dn.ln().ln()).sqrt() } else { 0.0 }).collect();
    Ok(Grid { scale, start, times: s2[1..].to_vec(), weights })
}

#[derive(Clone, Debug, Default)]
struct LilPath {
    running_max: f64,
    /// Bit `c` set when the statistic visited `[-0.9 + 0.2c, -0.7 + 0.2c)`.
    cells: u16,
    trace: Vec<(usize, f64)>,
}

impl LilPath {
    fn covered(&self) -> bool {
        self.cells == (1 << 9) - 1
    }
}

fn trace_points(n_max: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (0..=60).map(|i| (10f64.powf(i as f64 / 60.0 * (n_max as f64).log10())).round() as usize).collect();
    pts.dedup();
    pts
}

fn lil_path(sums: impl Iterator<Item = f64>, g: &Grid, trace_at: Option<&[usize]>) -> LilPath {
    let mut out = LilPath { running_max: f64::NEG_INFINITY, ..Default::default() };
    let mut next_trace = 0;
    for (i, s) in sums.enumerate() {
        let n = i + 1;
        if n < g.start {
            continue;
        }
        let v = s * g.scale[n];
        out.running_max = out.running_max.max(v);
        if (-0.9..0.9).contains(&v) {
            let c = (((v + 0.9) / 0.2).floor() as u32).min(8);
            out.cells |= 1 << c;
        }
        if let Some(pts) = trace_at {
            while next_trace < pts.len() && pts[next_trace] <= n {
                if pts[next_trace] == n {
                    out.trace.push((n, out.running_max));
                }
                next_trace += 1;
            }
        }
    }
    out
}

fn walk_sums<'a>(p: f64, weights: &'a [f64], seed: u64, stream: u64) -> impl Iterator<Item = f64> + 'a {
    let mut walker = SignWalker::new(p, seed, stream).expect("validated p");
    let mut s = 0.0;
    weights.iter().map(move |a| {
        s += a * walker.next_sign() as f64;
        s
    })
}

/// Running maximum of `S_n / sqrt(2 D_n log log D_n)` over `start <= n <= n_max`,
/// for the walk and for Brownian paths `B(s_n^2)` on the same grid.
pub fn lil_experiment(
    params: &ErwvrpParams,
    n_max: usize,
    replicas: usize,
    seed: u64,
    normalization: Normalization,
) -> Result<ExperimentReport> {
    if replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    let p = params.p();
    let ratio = p / (1.0 - p);
    let energy = params.weights().energies(n_max);
    let g = grid(params, n_max, |s2, n| match normalization {
        Normalization::ExactVariance => s2[n],
        Normalization::ScaledEnergy => ratio * energy[n],
        Normalization::Energy => energy[n],
    })?;
    let pts = trace_points(n_max);
    let results: Vec<(LilPath, LilPath)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let tr = (i == 0).then_some(pts.as_slice());
            let walk = lil_path(walk_sums(p, &g.weights, seed, i), &g, tr);
            let oracle_path = brownian_path(&g.times, seed, ORACLE_STREAM + i).expect("nondecreasing variances");
            let oracle = lil_path(oracle_path.into_iter(), &g, tr);
            (walk, oracle)
        })
        .collect();
    let walk_max: Vec<f64> = results.iter().map(|r| r.0.running_max).collect();
    let oracle_max: Vec<f64> = results.iter().map(|r| r.1.running_max).collect();

    let mut report = ExperimentReport::new(
        "lil",
        params! {
            "p" => p,
            "weights" => params.weights().kind().to_string(),
            "n_max" => n_max,
            "normalization" => normalization.to_string(),
        },
        seed,
        replicas as u64,
    );
    report.check(Check::info("first index with denominator > e^2", g.start as f64));
    report.check(Check::info("median running max (walk)", median(&walk_max)));
    report.check(Check::info("median running max (oracle)", median(&oracle_max)));
    let k = k_of_p(p)?;
    match normalization {
        Normalization::ExactVariance | Normalization::ScaledEnergy => {
            let (lo, hi) = EXACT_BAND;
            report.check(Check::at_least(
                format!("fraction of walk running max in [{lo}, {hi}]"),
                fraction_within(&walk_max, lo, hi),
                EXACT_BAND_FRACTION,
            ));
            report.check(Check::at_least(
                format!("fraction of oracle running max in [{lo}, {hi}]"),
                fraction_within(&oracle_max, lo, hi),
                EXACT_BAND_FRACTION,
            ));
        }
        Normalization::Energy => {
            let hi = k.sqrt() * ENERGY_SLACK;
            report.check(Check::at_least(
                "fraction of walk running max <= sqrt(K(p)) * 1.1",
                fraction_within(&walk_max, f64::NEG_INFINITY, hi),
                ENERGY_BAND_FRACTION,
            ));
            report.check(Check::at_least(
                "fraction of oracle running max <= sqrt(K(p)) * 1.1",
                fraction_within(&oracle_max, f64::NEG_INFINITY, hi),
                ENERGY_BAND_FRACTION,
            ));
            report.check(Check::info(
                "fraction of walk running max >= 1/sqrt(K(p))",
                fraction_within(&walk_max, 1.0 / k.sqrt(), f64::INFINITY),
            ));
            if *params.weights().kind() == WeightKind::OddIndicator {
                let c = odd_weights_limsup(p);
                report.check(Check::within("median walk running max vs odd-weight limsup", median(&walk_max), c, ODD_WEIGHTS_TOL));
                report.check(Check::within("median oracle running max vs odd-weight limsup", median(&oracle_max), c, ODD_WEIGHTS_TOL));
            }
        }
    }
    if normalization == Normalization::ExactVariance {
        let cov = |paths: Vec<bool>| paths.iter().filter(|&&b| b).count() as f64 / paths.len() as f64;
        report.check(Check::at_least(
            "fraction of walk paths visiting every 0.2-cell of [-0.9, 0.9]",
            cov(results.iter().map(|r| r.0.covered()).collect()),
            COVERAGE_FRACTION,
        ));
        report.check(Check::at_least(
            "fraction of oracle paths visiting every 0.2-cell of [-0.9, 0.9]",
            cov(results.iter().map(|r| r.1.covered()).collect()),
            COVERAGE_FRACTION,
        ));
    }
    let mut t = Table::new("running_max", &["stream", "walk", "oracle"]);
    for (i, (w, o)) in walk_max.iter().zip(&oracle_max).enumerate() {
        t.push(vec![i as f64, *w, *o]);
    }
    report.table(t);
    let mut t = Table::new("trace", &["n", "walk_running_max", "oracle_running_max"]);
    for ((n, w), (_, o)) in results[0].0.trace.iter().zip(&results[0].1.trace) {
        t.push(vec![*n as f64, *w, *o]);
    }
    report.table(t);
    let qs = [0.05, 0.25, 0.5, 0.75, 0.95];
    let mut t = Table::new("quantiles", &["q", "walk", "oracle"]);
    for ((q, w), o) in qs.iter().zip(quantiles(&walk_max, &qs)).zip(quantiles(&oracle_max, &qs)) {
        t.push(vec![*q, w, o]);
    }
    report.table(t);
    report.note("bands are finite-horizon sanity bands; the oracle is held to the same bands on the identical time grid");
    Ok(report)
}

fn chung_path(sums: impl Iterator<Item = f64>, g: &Grid) -> f64 {
    let mut running_min = f64::INFINITY;
    let mut max_abs = 0.0f64;
    for (i, s) in sums.enumerate() {
        let n = i + 1;
        max_abs = max_abs.max(s.abs());
        if n >= g.start {
            let d = g.times[n - 1];
            running_min = running_min.min((d.ln().ln() / d).sqrt() * max_abs);
        }
    }
    running_min
}

/// Running minimum of `sqrt(log log s_n^2 / s_n^2) max_{k<=n} |S_k|`, walk
/// against Brownian paths on the grid `s_k^2`.
pub fn chung_experiment(params: &ErwvrpParams, n_max: usize, replicas: usize, seed: u64) -> Result<ExperimentReport> {
    if replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    let g = grid(params, n_max, |s2, n| s2[n])?;
    let p = params.p();
    let results: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let walk = chung_path(walk_sums(p, &g.weights, seed, i), &g);
            let oracle_path = brownian_path(&g.times, seed, ORACLE_STREAM + i).expect("nondecreasing variances");
            (walk, chung_path(oracle_path.into_iter(), &g))
        })
        .collect();
    let walk: Vec<f64> = results.iter().map(|r| r.0).collect();
    let oracle: Vec<f64> = results.iter().map(|r| r.1).collect();
    let constant = PI / 8f64.sqrt();
    let mut report = ExperimentReport::new(
        "chung",
        params! {"p" => p, "weights" => params.weights().kind().to_string(), "n_max" => n_max},
        seed,
        replicas as u64,
    );
    let (mw, mo) = (median(&walk), median(&oracle));
    report.check(Check::info("median running min (walk)", mw));
    report.check(Check::info("median running min (oracle)", mo));
    report.check(Check::info("pi/sqrt(8)", constant));
    report.check(Check::at_most("|median walk - median oracle|", (mw - mo).abs(), CHUNG_MEDIAN_TOL));
    let (lo, hi) = CHUNG_BAND;
    report.check(Check::at_least(
        format!("fraction of oracle running min in [{lo}, {hi}] * pi/sqrt(8)"),
        fraction_within(&oracle, lo * constant, hi * constant),
        CHUNG_BAND_FRACTION,
    ));
    report.check(Check::info(
        format!("fraction of walk running min in [{lo}, {hi}] * pi/sqrt(8)"),
        fraction_within(&walk, lo * constant, hi * constant),
    ));
    let mut t = Table::new("running_min", &["stream", "walk", "oracle"]);
    for (i, (w, o)) in results.iter().enumerate() {
        t.push(vec![i as f64, *w, *o]);
    }
    report.table(t);
    report.note("the constant is approached at rate O(1/log log n); the comparison is against the oracle, not the constant");
    Ok(report)
}
