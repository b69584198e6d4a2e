//! Block boundaries `h_n`, block energies `B_n = A_{h_n}`, delays `H_n`,
//! block sums `Y_j` over `I_j = (h_j, h_{j+1}]` and the Gordin corrector
//! `u_j` with martingale differences `xi_j = Y_j - u_j + u_{j+1}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::erwvrp::{block_second_moment, cumulative_second_moments, require_horizon, ErwvrpParams, WalkPath};
use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;
use crate::weights::WeightSequence;

/// Scan limit for unbounded generators.
pub const DEFAULT_MAX_INDEX: usize = 10_000_000;

/// Default term cap for corrector certification.
pub const DEFAULT_MAX_TERMS: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockingScheme {
    pub delta: f64,
    /// `h_1 = 0 < h_2 < ...`.
    pub boundaries: Vec<usize>,
    /// `B_n = A_{h_n}`.
    pub energies: Vec<f64>,
}

/// `h_1 = 0`, `h_{n+1} = min{h > h_n : A_h - A_{h_n} >= A_{h_n}^{1-delta/2}}`
/// with `0^x = 0`.
pub fn build_blocks(seq: &WeightSequence, delta: f64, count: usize) -> Result<BlockingScheme> {
    let limit = seq.horizon().unwrap_or(DEFAULT_MAX_INDEX);
    build_blocks_with_limit(seq, delta, count, limit)
}

pub fn build_blocks_with_limit(seq: &WeightSequence, delta: f64, count: usize, max_index: usize) -> Result<BlockingScheme> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if count < 2 {
        return Err(invalid(format!("need at least 2 boundaries (one block), got {count}")));
    }
    let exponent = 1.0 - delta / 2.0;
    let mut boundaries = vec![0usize];
    let mut energies = vec![0.0f64];
    // same summation order as WeightSequence::energies, so values agree bit for bit
    let mut acc = CompensatedSum::new();
    acc.add(0.0);
    let mut h = 0usize;
    let mut a_h;
    while boundaries.len() < count {
        let b = *energies.last().expect("nonempty");
        let threshold = if b == 0.0 { 0.0 } else { b.powf(exponent) };
        loop {
            if h >= max_index {
                return Err(Error::WeightsExhausted { index: h, wanted: count });
            }
            h += 1;
            let a = seq.weight(h);
            acc.add(a * a);
            a_h = acc.value();
            if a_h - b >= threshold {
                break;
            }
        }
        boundaries.push(h);
        energies.push(a_h);
    }
    Ok(BlockingScheme { delta, boundaries, energies })
}

/// `H = floor(24 log B / log(1/|alpha|)) + 1` for `B > 1`, else 1.
pub fn delay(energy: f64, alpha: f64) -> usize {
    if energy <= 1.0 || alpha == 0.0 {
        return 1;
    }
    (24.0 * energy.ln() / (1.0 / alpha.abs()).ln()).floor() as usize + 1
}

impl BlockingScheme {
    /// Number of complete blocks `M` (one fewer than the boundaries).
    pub fn block_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// `h_j`, 1-based.
    pub fn h(&self, j: usize) -> usize {
        self.boundaries[j - 1]
    }

    /// `B_j`, 1-based.
    pub fn b(&self, j: usize) -> f64 {
        self.energies[j - 1]
    }

    pub fn delays(&self, alpha: f64) -> Vec<usize> {
        self.energies.iter().map(|&b| delay(b, alpha)).collect()
    }

    pub fn last_boundary(&self) -> usize {
        *self.boundaries.last().expect("nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub j: usize,
    pub h_j: usize,
    pub b_j: f64,
    pub delay: usize,
    /// `E[Y_j^2]`.
    pub sigma_j_sq: f64,
    /// `s^2_{h_j}`.
    pub s_sq_h_j: f64,
}

/// Exact per-block quantities for `j = 1..=M`.
pub fn block_table(params: &ErwvrpParams, scheme: &BlockingScheme) -> Vec<BlockRow> {
    let n = scheme.last_boundary();
    let a = params.weights().values(n);
    let cum = cumulative_second_moments(params.alpha(), &a);
    (1..=scheme.block_count())
        .map(|j| {
            let (lo, hi) = (scheme.h(j), scheme.h(j + 1));
            BlockRow {
                j,
                h_j: lo,
                b_j: scheme.b(j),
                delay: delay(scheme.b(j), params.alpha()),
                sigma_j_sq: block_second_moment(params.alpha(), &a[lo..hi]),
                s_sq_h_j: cum[lo],
            }
        })
        .collect()
}

/// CSV with columns `j, h_j, B_j, H_j, sigma_j_sq, s_sq_h_j`.
pub fn write_block_csv<W: Write>(rows: &[BlockRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "h_j", "B_j", "H_j", "sigma_j_sq", "s_sq_h_j"])?;
    for r in rows {
        w.write_record([
            r.j.to_string(),
            r.h_j.to_string(),
            r.b_j.to_string(),
            r.delay.to_string(),
            r.sigma_j_sq.to_string(),
            r.s_sq_h_j.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStatistic {
    pub row: BlockRow,
    pub y: f64,
}

/// `Y_j = sum_{k in I_j} a_k X_k` next to the exact moments.
pub fn block_statistics(params: &ErwvrpParams, scheme: &BlockingScheme, path: &WalkPath) -> Result<Vec<BlockStatistic>> {
    require_horizon(path, scheme.last_boundary())?;
    let ys = block_sums(params, scheme, path);
    Ok(block_table(params, scheme)
        .into_iter()
        .zip(ys)
        .map(|(row, y)| BlockStatistic { row, y })
        .collect())
}

fn block_sums(params: &ErwvrpParams, scheme: &BlockingScheme, path: &WalkPath) -> Vec<f64> {
    (1..=scheme.block_count())
        .map(|j| {
            (scheme.h(j) + 1..=scheme.h(j + 1))
                .map(|k| params.weights().weight(k) * path.sign(k) as f64)
                .collect::<CompensatedSum>()
                .value()
        })
        .collect()
}

/// Which sign multiplies the corrector series `u_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// `X_{h_j}`, the last sign of block `j - 1` (`X_0 = 0`).
    #[default]
    PrecedingBlockEnd,
    /// `X_{h_{j-1}}`, the index as displayed in the closed form (`X_0 = 0` for `j <= 2`).
    DisplayedIndex,
}

impl Anchor {
    pub fn index(self, scheme: &BlockingScheme, j: usize) -> usize {
        match self {
            Anchor::PrecedingBlockEnd => scheme.h(j),
            Anchor::DisplayedIndex => {
                if j <= 1 {
                    0
                } else {
                    scheme.h(j - 1)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GordinOptions {
    pub anchor: Anchor,
    /// `u_j` uses `alpha^{k + exponent_offset}`; 1 reproduces the closed form,
    /// 0 gives `E[sum_{k > h_j} a_k X_k | X_{h_j}]`.
    pub exponent_offset: u32,
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for GordinOptions {
    fn default() -> Self {
        Self { anchor: Anchor::default(), exponent_offset: 1, tol: 1e-12, max_terms: DEFAULT_MAX_TERMS }
    }
}

/// Series value of `u_j` without the anchor sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrector {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// `anchor_sign * sum_{k>=1} a_{k+h_j} alpha^{k+offset}`, truncated at
/// `K >= 64 + 4 H_j` terms. With `|a_n| <= sqrt(A_n)` and the window
/// estimate `A_{N+i} <= A_N q^i` (`N = h_j + K`), the remainder is at most
/// `sqrt(A_N) |alpha|^{K+offset} rho / (1 - rho)` with `rho = |alpha| sqrt(q)`.
/// `K` doubles until that bound drops below `tol`.
pub fn gordin_corrector(
    params: &ErwvrpParams,
    scheme: &BlockingScheme,
    j: usize,
    anchor_sign: i8,
    opts: &GordinOptions,
) -> Result<Corrector> {
    let raw = corrector_series(params, scheme, j, opts)?;
    Ok(Corrector { value: anchor_sign as f64 * raw.value, ..raw })
}

fn corrector_series(params: &ErwvrpParams, scheme: &BlockingScheme, j: usize, opts: &GordinOptions) -> Result<Corrector> {
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("tol must be positive, got {}", opts.tol)));
    }
    if j == 0 || j > scheme.boundaries.len() {
        return Err(invalid(format!("block index {j} outside 1..={}", scheme.boundaries.len())));
    }
    let alpha = params.alpha();
    if alpha == 0.0 {
        return Ok(Corrector { value: 0.0, tail_bound: 0.0, terms: 0 });
    }
    let h = scheme.h(j);
    let abs_alpha = alpha.abs();
    let seq = params.weights();
    let mut k_terms = 64 + 4 * delay(scheme.b(j), alpha);
    loop {
        if k_terms > opts.max_terms {
            return Err(Error::Uncertified { max_terms: opts.max_terms });
        }
        let n = h + k_terms;
        let look = k_terms.max(64);
        let energy = seq.energies(n + look);
        if let Some(bound) = geometric_tail(&energy, n, look, abs_alpha, k_terms, opts.exponent_offset) {
            if bound <= opts.tol {
                let mut acc = CompensatedSum::new();
                let mut pow = alpha.powi(1 + opts.exponent_offset as i32);
                for k in 1..=k_terms {
                    acc.add(seq.weight(k + h) * pow);
                    pow *= alpha;
                }
                return Ok(Corrector { value: acc.value(), tail_bound: bound, terms: k_terms });
            }
        }
        k_terms *= 2;
    }
}

fn geometric_tail(energy: &[f64], n: usize, look: usize, abs_alpha: f64, k_terms: usize, offset: u32) -> Option<f64> {
    let a_n = energy[n];
    if a_n == 0.0 {
        return (energy[n + look] == 0.0).then_some(0.0);
    }
    let mut q = 1.0f64;
    for i in 1..=look {
        q = q.max((energy[n + i] / a_n).powf(1.0 / i as f64));
    }
    let rho = abs_alpha * q.sqrt();
    if rho >= 1.0 {
        return None;
    }
    Some(a_n.sqrt() * abs_alpha.powi((k_terms as u32 + offset) as i32) * rho / (1.0 - rho))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiSequence {
    /// `Y_1, ..., Y_M`.
    pub y: Vec<f64>,
    /// `u_1, ..., u_{M+1}`.
    pub u: Vec<f64>,
    /// `xi_1, ..., xi_M`.
    pub xi: Vec<f64>,
    /// `sum xi_j + u_1 - u_{M+1} - sum Y_j`.
    pub telescoping_residual: f64,
    /// `2 M tol`.
    pub residual_budget: f64,
    pub anchor: Anchor,
}

/// Series parts of `u_1..u_{M+1}`; they do not depend on the path.
pub fn corrector_values(params: &ErwvrpParams, scheme: &BlockingScheme, opts: &GordinOptions) -> Result<Vec<Corrector>> {
    (1..=scheme.boundaries.len()).map(|j| corrector_series(params, scheme, j, opts)).collect()
}

pub fn xi_sequence(params: &ErwvrpParams, scheme: &BlockingScheme, path: &WalkPath, opts: &GordinOptions) -> Result<XiSequence> {
    let series = corrector_values(params, scheme, opts)?;
    xi_from_correctors(params, scheme, path, &series, opts)
}

/// [`xi_sequence`] with precomputed [`corrector_values`], for many paths.
pub fn xi_from_correctors(
    params: &ErwvrpParams,
    scheme: &BlockingScheme,
    path: &WalkPath,
    series: &[Corrector],
    opts: &GordinOptions,
) -> Result<XiSequence> {
    require_horizon(path, scheme.last_boundary())?;
    let m = scheme.block_count();
    let y = block_sums(params, scheme, path);
    let u: Vec<f64> = (1..=m + 1)
        .map(|j| path.sign(opts.anchor.index(scheme, j)) as f64 * series[j - 1].value)
        .collect();
    let xi: Vec<f64> = (0..m).map(|i| y[i] - u[i] + u[i + 1]).collect();
    let lhs = xi.iter().copied().collect::<CompensatedSum>().value() + u[0] - u[m];
    let rhs = y.iter().copied().collect::<CompensatedSum>().value();
    Ok(XiSequence {
        y,
        u,
        xi,
        telescoping_residual: lhs - rhs,
        residual_budget: 2.0 * m as f64 * opts.tol,
        anchor: opts.anchor,
    })
}

/// Fitted constants for the block asymptotics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    /// `(B_{n+1} - B_n) / B_n^{1-delta/2}` for `n >= 2`.
    pub growth_ratios: Vec<f64>,
    /// `(s^2_{h_{j+1}} - s^2_{h_j}) / sigma_j^2`.
    pub variance_ratios: Vec<f64>,
    /// `max |ratio - 1| / (B_j^{-delta/4} sqrt(log B_j))` over `B_j > e`.
    pub variance_constant: f64,
    /// `max |u_j| / ((B_{j+1} - B_j)^{1/2} B_j^{-delta/8})` over `B_j > 0`.
    pub gordin_constant: f64,
    /// Strict failure one index before every boundary.
    pub minimal: bool,
}

pub fn block_diagnostics(params: &ErwvrpParams, scheme: &BlockingScheme, opts: &GordinOptions) -> Result<BlockDiagnostics> {
    let delta = scheme.delta;
    let rows = block_table(params, scheme);
    let m = scheme.block_count();
    let growth_ratios = (2..=m).map(|n| (scheme.b(n + 1) - scheme.b(n)) / scheme.b(n).powf(1.0 - delta / 2.0)).collect();
    let mut variance_ratios = Vec::with_capacity(m);
    let mut variance_constant = 0.0f64;
    let cum = cumulative_second_moments(params.alpha(), &params.weights().values(scheme.last_boundary()));
    for j in 1..=m {
        let ratio = (cum[scheme.h(j + 1)] - cum[scheme.h(j)]) / rows[j - 1].sigma_j_sq;
        variance_ratios.push(ratio);
        let b = scheme.b(j);
        if b > std::f64::consts::E {
            variance_constant = variance_constant.max((ratio - 1.0).abs() / (b.powf(-delta / 4.0) * b.ln().sqrt()));
        }
    }
    let series = corrector_values(params, scheme, opts)?;
    let mut gordin_constant = 0.0f64;
    for j in 1..=m {
        let b = scheme.b(j);
        if b > 0.0 {
            let scale = (scheme.b(j + 1) - b).sqrt() * b.powf(-delta / 8.0);
            gordin_constant = gordin_constant.max(series[j - 1].value.abs() / scale);
        }
    }
    let energy = params.weights().energies(scheme.last_boundary());
    let minimal = (1..=m).all(|n| {
        let b = scheme.b(n);
        let threshold = if b == 0.0 { 0.0 } else { b.powf(1.0 - delta / 2.0) };
        let before = scheme.h(n + 1) - 1;
        before == scheme.h(n) || energy[before] - b < threshold
    });
    Ok(BlockDiagnostics { growth_ratios, variance_ratios, variance_constant, gordin_constant, minimal })
}
