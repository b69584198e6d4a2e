//! Elephant random walk remembering the very recent past, with variable
//! step length: `X_1` is a fair sign, `X_{k+1} = X_k` with probability `p`
//! and `-X_k` otherwise, and `S_n = a_1 X_1 + ... + a_n X_n`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;
use crate::rng::StreamRng;
use crate::weights::WeightSequence;

#[derive(Clone, Debug, PartialEq)]
pub struct ErwvrpParams {
    p: f64,
    alpha: f64,
    weights: WeightSequence,
    horizon: usize,
}

impl ErwvrpParams {
    pub fn new(p: f64, weights: WeightSequence, horizon: usize) -> Result<Self> {
        check_p(p)?;
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(Self { p, alpha: 2.0 * p - 1.0, weights, horizon })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.p, self.weights.clone(), horizon)
    }

    pub fn simulate(&self, seed: u64, stream: u64) -> WalkPath {
        simulate(self, seed, stream)
    }

    /// `E[(S_n - S_m)^2]`.
    pub fn second_moment(&self, m: usize, n: usize) -> Result<f64> {
        exact_second_moment(self, m, n)
    }

    /// `s_0^2, ..., s_n^2` with `s_k^2 = E[S_k^2]`.
    pub fn cumulative_variances(&self, n: usize) -> Vec<f64> {
        cumulative_second_moments(self.alpha, &self.weights.values(n))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("memory parameter p must lie in (0, 1), got {p}")))
    }
}

/// Streaming sign generator; `simulate` is built on it.
#[derive(Clone, Debug)]
pub struct SignWalker {
    rng: StreamRng,
    p: f64,
    last: i8,
}

impl SignWalker {
    pub fn new(p: f64, seed: u64, stream: u64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { rng: StreamRng::new(seed, stream), p, last: 0 })
    }

    /// Next sign `X_k`.
    #[inline]
    pub fn next_sign(&mut self) -> i8 {
        self.last = if self.last == 0 {
            if self.rng.bernoulli(0.5) {
                1
            } else {
                -1
            }
        } else if self.rng.bernoulli(self.p) {
            self.last
        } else {
            -self.last
        };
        self.last
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    /// `X_1, ..., X_n`.
    pub signs: Vec<i8>,
    /// `S_0, ..., S_n`.
    pub sums: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl WalkPath {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `X_k` for `1 <= k <= n`, and `X_0 = 0`.
    pub fn sign(&self, k: usize) -> i8 {
        if k == 0 {
            0
        } else {
            self.signs[k - 1]
        }
    }

    /// CSV with columns `k, X_k, S_k` for `k = 0..=n` (`X_0 = 0`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "X_k", "S_k"])?;
        for k in 0..=self.len() {
            w.write_record([k.to_string(), self.sign(k).to_string(), self.sums[k].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn simulate(params: &ErwvrpParams, seed: u64, stream: u64) -> WalkPath {
    let n = params.horizon;
    let mut walker = SignWalker::new(params.p, seed, stream).expect("validated p");
    let mut signs = Vec::with_capacity(n);
    let mut sums = Vec::with_capacity(n + 1);
    sums.push(0.0);
    let mut s = 0.0;
    for k in 1..=n {
        let x = walker.next_sign();
        s += params.weights.weight(k) * x as f64;
        signs.push(x);
        sums.push(s);
    }
    WalkPath { signs, sums, seed, stream }
}

/// `E[X_k X_l] = alpha^{|k-l|}`.
pub fn exact_cross_moment(p: f64, k: usize, l: usize) -> Result<f64> {
    check_p(p)?;
    if k == 0 || l == 0 {
        return Err(invalid("indices start at 1"));
    }
    Ok((2.0 * p - 1.0).powi(k.abs_diff(l) as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    /// O(n) recursion on the one-sided weighted tail.
    #[default]
    Recursive,
    /// O(n^2) double sum, kept as an oracle.
    DoubleSum,
}

/// `E[(S_n - S_m)^2] = sum_{m<k,l<=n} a_k a_l alpha^{|k-l|}`.
pub fn exact_second_moment(params: &ErwvrpParams, m: usize, n: usize) -> Result<f64> {
    exact_second_moment_with(params, m, n, MomentMethod::Recursive)
}

pub fn exact_second_moment_with(params: &ErwvrpParams, m: usize, n: usize, method: MomentMethod) -> Result<f64> {
    if m >= n {
        return Err(invalid(format!("need m < n, got m={m}, n={n}")));
    }
    let a: Vec<f64> = (m + 1..=n).map(|k| params.weights.weight(k)).collect();
    Ok(match method {
        MomentMethod::Recursive => block_second_moment(params.alpha, &a),
        MomentMethod::DoubleSum => double_sum_second_moment(params.alpha, &a),
    })
}

/// Variance of `sum_j a_j X_{j}` over consecutive indices, via
/// `C_j = alpha (C_{j-1} + a_{j-1})`.
pub fn block_second_moment(alpha: f64, a: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut c = 0.0;
    let mut prev = 0.0;
    for &aj in a {
        c = alpha * (c + prev);
        acc.add(aj * aj + 2.0 * aj * c);
        prev = aj;
    }
    acc.value()
}

pub fn double_sum_second_moment(alpha: f64, a: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (i, ai) in a.iter().enumerate() {
        for (j, aj) in a.iter().enumerate() {
            acc.add(ai * aj * alpha.powi(i.abs_diff(j) as i32));
        }
    }
    acc.value()
}

/// `s_0^2, ..., s_n^2` for the weights `a_1, ..., a_n`.
pub fn cumulative_second_moments(alpha: f64, a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + 1);
    out.push(0.0);
    let mut acc = CompensatedSum::new();
    let mut c = 0.0;
    let mut prev = 0.0;
    for &aj in a {
        c = alpha * (c + prev);
        acc.add(aj * aj + 2.0 * aj * c);
        out.push(acc.value());
        prev = aj;
    }
    out
}

/// `K(p) = max(p/(1-p), (1-p)/p)`.
pub fn k_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok((p / (1.0 - p)).max((1.0 - p) / p))
}

/// `phi(m) = |alpha|^m / 2`.
pub fn phi_mixing(p: f64, m: usize) -> Result<f64> {
    check_p(p)?;
    Ok((2.0 * p - 1.0).abs().powi(m as i32) / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub m: usize,
    pub n: usize,
    pub exact: f64,
    pub a_diff: f64,
    pub ratio: f64,
}

pub fn moment_table(params: &ErwvrpParams, pairs: &[(usize, usize)]) -> Result<Vec<MomentRow>> {
    pairs
        .iter()
        .map(|&(m, n)| {
            let exact = exact_second_moment(params, m, n)?;
            let a_diff = params.weights.partial_energy(n) - params.weights.partial_energy(m);
            Ok(MomentRow { m, n, exact, a_diff, ratio: exact / a_diff })
        })
        .collect()
}

/// CSV with columns `m, n, exact, A_diff, ratio`.
pub fn write_moment_csv<W: Write>(rows: &[MomentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "n", "exact", "A_diff", "ratio"])?;
    for r in rows {
        w.write_record([r.m.to_string(), r.n.to_string(), r.exact.to_string(), r.a_diff.to_string(), r.ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `M_n = sum a_k d_k` with `d_k = X_k - alpha X_{k-1}` and the two drift terms
///
/// ```text
/// S_n - M_n/(1-alpha) = alpha/(1-alpha) sum_{k<n} (a_{k+1} - a_k) X_k
///                       - alpha a_n X_n / (1-alpha).
/// ```
///
/// All vectors are indexed by `n = 1..=len` (entry `n - 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoobDecomposition {
    pub alpha: f64,
    pub martingale: Vec<f64>,
    pub weight_drift: Vec<f64>,
    pub boundary_drift: Vec<f64>,
    pub residual: Vec<f64>,
}

impl DoobDecomposition {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Differences `d_k` recovered from the martingale path.
    pub fn differences(&self, weights: &WeightSequence) -> Vec<f64> {
        let mut prev = 0.0;
        self.martingale
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let d = (m - prev) / weights.weight(i + 1);
                prev = *m;
                d
            })
            .collect()
    }
}

pub fn doob_decompose(params: &ErwvrpParams, path: &WalkPath) -> Result<DoobDecomposition> {
    let n = path.len();
    if path.sums.len() != n + 1 {
        return Err(invalid("path sums and signs disagree in length"));
    }
    let alpha = params.alpha;
    let scale = 1.0 / (1.0 - alpha);
    let mut martingale = Vec::with_capacity(n);
    let mut weight_drift = Vec::with_capacity(n);
    let mut boundary_drift = Vec::with_capacity(n);
    let mut residual = Vec::with_capacity(n);
    let mut m = CompensatedSum::new();
    let mut drift = CompensatedSum::new();
    for k in 1..=n {
        let a = params.weights.weight(k);
        let x = path.sign(k) as f64;
        let d = x - alpha * path.sign(k - 1) as f64;
        m.add(a * d);
        if k > 1 {
            let x_prev = path.sign(k - 1) as f64;
            drift.add((params.weights.weight(k) - params.weights.weight(k - 1)) * x_prev);
        }
        let mk = m.value();
        let w = alpha * scale * drift.value();
        let b = -alpha * a * x * scale;
        martingale.push(mk);
        weight_drift.push(w);
        boundary_drift.push(b);
        residual.push(path.sums[k] - mk * scale - w - b);
    }
    Ok(DoobDecomposition { alpha, martingale, weight_drift, boundary_drift, residual })
}

/// Path horizon check shared by the block diagnostics.
pub(crate) fn require_horizon(path: &WalkPath, required: usize) -> Result<()> {
    if path.len() < required {
        Err(Error::HorizonMismatch { horizon: path.len(), required })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, w: WeightSequence, n: usize) -> ErwvrpParams {
        ErwvrpParams::new(p, w, n).unwrap()
    }

    #[test]
    fn rejects_boundary_p() {
        for p in [0.0, 1.0, -0.2, 2.0, f64::NAN] {
            assert!(ErwvrpParams::new(p, WeightSequence::constant(), 10).is_err());
        }
        assert!(ErwvrpParams::new(0.5, WeightSequence::constant(), 0).is_err());
    }

    #[test]
    fn path_invariants() {
        let pr = params(0.7, WeightSequence::power(0.5).unwrap(), 1000);
        let path = pr.simulate(3, 9);
        assert_eq!(path.sums[0], 0.0);
        for k in 1..=1000 {
            let step = pr.weights().weight(k) * path.sign(k) as f64;
            assert!((path.sums[k] - path.sums[k - 1] - step).abs() < 1e-9);
        }
        assert_eq!(path, pr.simulate(3, 9));
        assert_ne!(path.signs, pr.simulate(3, 10).signs);
    }

    #[test]
    fn fair_signs_at_half() {
        let n = 100_000;
        let path = params(0.5, WeightSequence::constant(), n).simulate(1, 0);
        let mean = path.signs.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn transition_frequency() {
        let n = 100_000;
        let path = params(0.9, WeightSequence::constant(), n).simulate(2, 0);
        let agree = path.signs.windows(2).filter(|w| w[0] == w[1]).count() as f64 / (n - 1) as f64;
        assert!((agree - 0.9).abs() <= 3.0 * (0.09 / n as f64).sqrt());
    }

    #[test]
    fn cross_moment_examples() {
        assert_eq!(exact_cross_moment(0.75, 3, 3).unwrap(), 1.0);
        assert_eq!(exact_cross_moment(0.75, 1, 3).unwrap(), 0.25);
        assert_eq!(exact_cross_moment(0.5, 1, 2).unwrap(), 0.0);
        assert!(exact_cross_moment(0.5, 0, 2).is_err());
    }

    #[test]
    fn second_moment_examples() {
        let w = WeightSequence::power(0.7).unwrap();
        let pr = params(0.5, w.clone(), 10);
        assert!((pr.second_moment(0, 10).unwrap() - w.partial_energy(10)).abs() < 1e-12);
        assert_eq!(params(0.75, WeightSequence::constant(), 2).second_moment(0, 2).unwrap(), 3.0);
        assert_eq!(params(0.75, WeightSequence::odd_indicator(), 4).second_moment(0, 4).unwrap(), 2.5);
        assert!(pr.second_moment(5, 5).is_err());
    }

    #[test]
    fn recursion_matches_double_sum() {
        for (p, w) in [
            (0.75, WeightSequence::constant()),
            (0.2, WeightSequence::power(1.3).unwrap()),
            (0.9, WeightSequence::alternating()),
            (0.6, WeightSequence::odd_indicator()),
        ] {
            let pr = params(p, w, 500);
            for (m, n) in [(0, 500), (17, 400), (250, 251), (0, 1)] {
                let fast = exact_second_moment_with(&pr, m, n, MomentMethod::Recursive).unwrap();
                let slow = exact_second_moment_with(&pr, m, n, MomentMethod::DoubleSum).unwrap();
                assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0), "{p} {m} {n}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn cumulative_matches_direct() {
        let pr = params(0.75, WeightSequence::power(0.5).unwrap(), 300);
        let cum = pr.cumulative_variances(300);
        for n in [1, 2, 50, 300] {
            assert!((cum[n] - pr.second_moment(0, n).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn k_and_phi_examples() {
        assert_eq!(k_of_p(0.5).unwrap(), 1.0);
        assert_eq!(k_of_p(0.75).unwrap(), 3.0);
        assert_eq!(k_of_p(0.25).unwrap(), 3.0);
        assert!(k_of_p(1.0).is_err());
        assert_eq!(phi_mixing(0.75, 2).unwrap(), 0.125);
        assert_eq!(phi_mixing(0.5, 1).unwrap(), 0.0);
        assert!((phi_mixing(0.9, 3).unwrap() - 0.256).abs() < 1e-15);
    }

    #[test]
    fn doob_examples() {
        let pr = params(0.5, WeightSequence::power(0.5).unwrap(), 100);
        let path = pr.simulate(1, 1);
        let d = doob_decompose(&pr, &path).unwrap();
        for k in 1..=100 {
            assert!((d.martingale[k - 1] - path.sums[k]).abs() < 1e-12);
            assert_eq!(d.weight_drift[k - 1], 0.0);
            assert_eq!(d.boundary_drift[k - 1], 0.0);
        }
        let pr = params(0.75, WeightSequence::constant(), 100);
        let d = doob_decompose(&pr, &pr.simulate(1, 2)).unwrap();
        assert!(d.weight_drift.iter().all(|&w| w == 0.0));
        let pr = params(0.75, WeightSequence::power(0.8).unwrap(), 100);
        let d = doob_decompose(&pr, &pr.simulate(1, 3)).unwrap();
        assert!(d.max_abs_residual() < 1e-12);
    }

    #[test]
    fn csv_exports() {
        let pr = params(0.6, WeightSequence::constant(), 3);
        let mut buf = Vec::new();
        pr.simulate(0, 0).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("k,X_k,S_k\n0,0,0\n"));
        let rows = moment_table(&pr, &[(0, 2)]).unwrap();
        let mut buf = Vec::new();
        write_moment_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("m,n,exact,A_diff,ratio\n0,2,"));
    }
}
