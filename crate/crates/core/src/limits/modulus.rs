use serde::{Deserialize, Serialize};

use super::profile::{map_uniform, VarianceProfile};
use crate::error::{invalid, Error, Result};
use crate::fractal::{match_depth, match_depth_shifted, FractalFunction};
use crate::params;
use crate::point::TorusPoint;
use crate::report::{Check, ExperimentReport, Table};
use crate::stats::{covariance, ks_statistic, mean_se, quantiles, variance};

pub const EVEN_KS_LIMIT: f64 = 0.02;
pub const ODD_KS_LIMIT: f64 = 0.03;
pub const FCLT_TOL: f64 = 0.05;
pub const REGULAR_VARIATION_TOL: f64 = 0.05;

/// Relative accuracy of each certified evaluation, as a fraction of `h`.
const EVAL_EPS_PER_H: f64 = 1e-9;

/// Coefficients `a_k r^{-(k-1)}` for `k = 1..=terms` with `terms` covering both
/// the certified truncation and `min_terms`.
fn coefficients(f: &FractalFunction, eps: f64, min_terms: usize) -> Result<Vec<f64>> {
    let n = f.truncation(eps)?.terms().max(min_terms);
    let r = f.base() as f64;
    Ok((1..=n).map(|k| f.weights().weight(k) * r.powi(-(k as i32 - 1))).collect())
}

/// `(f(x+h) - f(x), w_m(x))` by summing the term differences directly.
fn increment_and_walk(r: u32, coeffs: &[f64], weights: &[f64], x: &TorusPoint, h: &TorusPoint, m: usize) -> (f64, f64) {
    let (xh, _) = x.add_mod1(h);
    let mut s0 = x.frac_stream(r);
    let mut s1 = xh.frac_stream(r);
    let mut inc = 0.0;
    let mut w = 0.0;
    for (k, c) in coeffs.iter().enumerate() {
        if k < m {
            w += if s0.upper_half() { -weights[k] } else { weights[k] };
        }
        inc += c * (s1.dist() - s0.dist());
        s0.advance();
        s1.advance();
    }
    (inc, w)
}

fn check_h(r: u32, h: &TorusPoint) -> Result<usize> {
    if h.is_zero() || h.cmp_inverse_power(r, 1) != std::cmp::Ordering::Less {
        return Err(invalid(format!("h = {} outside (0, 1/{r})", h.to_f64())));
    }
    Ok(h.scale_index(r).expect("positive") as usize)
}

/// Per-`h` KS distance of `(f(x+h) - f(x)) / (h sqrt(sigma_l(h)))` to `N(0, 1)`
/// over uniform `x`, and the residual of `increment/h - w_{m(h)}(x)`.
pub fn modulus_experiment(
    f: &FractalFunction,
    profile: &VarianceProfile,
    h_grid: &[TorusPoint],
    x_samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let r = f.base();
    if profile.base != r {
        return Err(invalid(format!("profile base {} differs from function base {r}", profile.base)));
    }
    if h_grid.is_empty() {
        return Err(invalid("empty h grid"));
    }
    let ms = h_grid.iter().map(|h| check_h(r, h)).collect::<Result<Vec<_>>>()?;
    if h_grid.windows(2).any(|w| w[1].to_f64() >= w[0].to_f64()) {
        return Err(invalid("h grid must be decreasing"));
    }
    if x_samples < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: x_samples });
    }
    let limit = if f.is_even() { EVEN_KS_LIMIT } else { ODD_KS_LIMIT };
    let mut report = ExperimentReport::new(
        "modulus",
        params! {
            "r" => r,
            "weights" => f.weights().kind().to_string(),
            "h" => h_grid.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "x_samples" => x_samples,
        },
        seed,
        x_samples as u64,
    );
    let mut summary = Table::new("per_h", &["h", "m", "sigma_l", "ks", "mean", "variance", "resid_q50", "resid_q95"]);
    for (h, &m) in h_grid.iter().zip(&ms) {
        let hf = h.to_f64();
        let coeffs = coefficients(f, EVAL_EPS_PER_H * hf, m)?;
        let weights = f.weights().values(coeffs.len());
        let sigma = profile.sigma_l(h);
        let v_m = profile.v(m);
        if !(sigma > 0.0) {
            return Err(invalid(format!("sigma_l vanishes at h = {hf}")));
        }
        let norm = hf * sigma.sqrt();
        let pairs = map_uniform(x_samples, seed, |x| increment_and_walk(r, &coeffs, &weights, x, h, m));
        let z: Vec<f64> = pairs.iter().map(|(inc, _)| inc / norm).collect();
        let resid: Vec<f64> = pairs.iter().map(|(inc, w)| ((inc / hf - w) / v_m.sqrt()).abs()).collect();
        let ks = ks_statistic(&z)?;
        let label = format!("KS at h = {h} (m = {m})");
        let check = Check::below(label, ks, limit);
        report.check(if m <= 1 { check.into_info() } else { check });
        let rq = quantiles(&resid, &[0.5, 0.95]);
        let (mean, _) = mean_se(&z);
        summary.push(vec![hf, m as f64, sigma, ks, mean, variance(&z), rq[0], rq[1]]);
        report.check(Check::info(format!("median |increment/h - w_m| / sqrt(V_m) at h = {h}"), rq[0]));
        if m <= 1 {
            let bound = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            report.check(Check::info(format!("max |normalized increment| at h = {h}"), bound));
            report.note(format!("h = {h} has m(h) = 1: no asymptotic regime, KS reported without a verdict"));
        }
    }
    report.table(summary);
    Ok(report)
}

/// Marginal variances and covariances of
/// `t -> (f(x + r^{-m_t}) - f(x)) / (r^{-m_t} sqrt(V_n))`, `m_t = floor(n t^{1/beta})`.
pub fn functional_clt_experiment(
    f: &FractalFunction,
    profile: &VarianceProfile,
    beta: f64,
    n: usize,
    t_grid: &[f64],
    x_samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let r = f.base();
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    if profile.base != r || profile.n_max() < n {
        return Err(invalid("profile must share the base and reach n"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(invalid("t grid must lie in (0, 1]"));
    }
    if x_samples < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: x_samples });
    }
    let v_n = profile.v(n);
    let ms: Vec<usize> = t_grid.iter().map(|&t| (n as f64 * t.powf(1.0 / beta)).floor() as usize).collect();
    for (&t, &m) in t_grid.iter().zip(&ms) {
        let ratio = profile.v(m) / v_n;
        if !((ratio / t - 1.0).abs() <= REGULAR_VARIATION_TOL) {
            return Err(Error::Precondition(format!(
                "V_{m}/V_{n} = {ratio} is not within {REGULAR_VARIATION_TOL} (relative) of t = {t}; V_n is not regularly varying with index {beta} on this grid"
            )));
        }
    }
    if ms.contains(&0) {
        return Err(Error::Precondition("floor(n t^(1/beta)) = 0 on the grid".into()));
    }
    let hs = ms.iter().map(|&m| TorusPoint::inverse_power(r, m as u32)).collect::<Result<Vec<_>>>()?;
    let h_min = hs.iter().map(|h| h.to_f64()).fold(1.0, f64::min);
    let coeffs = coefficients(f, EVAL_EPS_PER_H * h_min, *ms.iter().max().unwrap())?;
    let weights = f.weights().values(coeffs.len());
    let paths: Vec<Vec<f64>> = map_uniform(x_samples, seed, |x| {
        hs.iter()
            .zip(&ms)
            .map(|(h, &m)| increment_and_walk(r, &coeffs, &weights, x, h, m).0 / (h.to_f64() * v_n.sqrt()))
            .collect()
    });
    let mut report = ExperimentReport::new(
        "fclt",
        params! {
            "r" => r,
            "weights" => f.weights().kind().to_string(),
            "beta" => beta,
            "n" => n,
            "t" => t_grid,
            "x_samples" => x_samples,
        },
        seed,
        x_samples as u64,
    );
    let col = |i: usize| -> Vec<f64> { paths.iter().map(|p| p[i]).collect() };
    let mut table = Table::new("covariances", &["s", "t", "empirical", "brownian"]);
    for (i, &s) in t_grid.iter().enumerate() {
        let xi = col(i);
        let v = variance(&xi);
        report.check(Check::within(format!("Var at t = {s}"), v, s, FCLT_TOL));
        table.push(vec![s, s, v, s]);
        for (j, &t) in t_grid.iter().enumerate().skip(i + 1) {
            let c = covariance(&xi, &col(j));
            report.check(Check::within(format!("Cov at ({s}, {t})"), c, s.min(t), FCLT_TOL));
            table.push(vec![s, t, c, s.min(t)]);
        }
    }
    report.table(table);
    Ok(report)
}

/// Empirical `P(l - min(k_0, k0_hat) >= j)` at `h = r^{-l}` (plain `k_0` for
/// even `r`) against `2 r^{-(j-1)}`.
pub fn digit_tail_experiment(r: u32, ell: u32, j_max: usize, samples: usize, seed: u64) -> Result<ExperimentReport> {
    if r < 2 || ell == 0 || j_max == 0 {
        return Err(invalid("need r >= 2, l >= 1, j_max >= 1"));
    }
    if samples < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: samples });
    }
    let h = TorusPoint::inverse_power(r, ell)?;
    let gaps: Vec<i64> = map_uniform(samples, seed, |x| {
        let k0 = match_depth(r, x, &h).expect("h > 0");
        let depth = if r % 2 == 1 { k0.min(match_depth_shifted(r, x, &h).expect("h > 0")) } else { k0 };
        ell as i64 - depth
    });
    let mut report = ExperimentReport::new(
        "digit_tail",
        params! {"r" => r, "l" => ell, "j_max" => j_max, "samples" => samples},
        seed,
        samples as u64,
    );
    let mut table = Table::new("tail", &["j", "empirical", "se", "bound"]);
    let n = samples as f64;
    for j in 1..=j_max {
        let p = gaps.iter().filter(|&&g| g >= j as i64).count() as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        let bound = 2.0 * (r as f64).powi(-(j as i32 - 1));
        report.check(Check::at_most(format!("P(l - depth >= {j}) - 3 SE"), p - 3.0 * se, bound));
        table.push(vec![j as f64, p, se, bound]);
    }
    report.table(table);
    Ok(report)
}

/// `sup |f(x+T) - f(x)| / T` over `T = r^{-j}`, `j = 1..=level`, for `level = 1..=levels`.
/// Non-decreasing in `level` by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientTrace {
    pub levels: Vec<u32>,
    pub sup: Vec<f64>,
}

pub fn sup_quotient_trace(f: &FractalFunction, x: &TorusPoint, levels: u32) -> Result<QuotientTrace> {
    let r = f.base();
    let mut sup = Vec::with_capacity(levels as usize);
    let mut best = 0.0f64;
    let h_min = (r as f64).powi(-(levels as i32));
    let coeffs = coefficients(f, EVAL_EPS_PER_H * h_min, levels as usize)?;
    let weights = f.weights().values(coeffs.len());
    for j in 1..=levels {
        let t = TorusPoint::inverse_power(r, j)?;
        let (inc, _) = increment_and_walk(r, &coeffs, &weights, x, &t, 0);
        best = best.max(inc.abs() / t.to_f64());
        sup.push(best);
    }
    Ok(QuotientTrace { levels: (1..=levels).collect(), sup })
}
