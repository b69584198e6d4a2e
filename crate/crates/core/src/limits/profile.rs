use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::erwvrp::cumulative_second_moments;
use crate::error::{invalid, Result};
use crate::fractal::memory_parameter;
use crate::params;
use crate::point::TorusPoint;
use crate::report::{Check, ExperimentReport, Table};
use crate::rng::StreamRng;
use crate::stats::mean_se;
use crate::weights::WeightSequence;

/// `V_n = E[w_n^2]` under the uniform law, with an interpolant `sigma_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    pub base: u32,
    /// `V_0, ..., V_{n_max}`.
    pub values: Vec<f64>,
}

/// Even `r`: `V_n = A_n`. Odd `r`: the walk variance with `alpha = 1/r`.
pub fn variance_profile(r: u32, seq: &WeightSequence, n_max: usize) -> Result<VarianceProfile> {
    if r < 2 {
        return Err(invalid(format!("base must be at least 2, got {r}")));
    }
    if n_max == 0 {
        return Err(invalid("n_max must be at least 1"));
    }
    let values = if r.is_multiple_of(2) {
        seq.energies(n_max)
    } else {
        cumulative_second_moments(2.0 * memory_parameter(r) - 1.0, &seq.values(n_max))
    };
    Ok(VarianceProfile { base: r, values })
}

impl VarianceProfile {
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn v(&self, n: usize) -> f64 {
        self.values[n.min(self.n_max())]
    }

    /// `V_n` non-decreasing, so `sigma_l` is non-increasing in `h`.
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// `sigma_l(h)`: `V_n` at `h = r^{-n}`, linear in `log h` between grid
    /// points, `V_{n_max}` below the grid and `V_0` for `h >= 1`.
    pub fn sigma_l(&self, h: &TorusPoint) -> f64 {
        let Some(m) = h.scale_index(self.base) else {
            return self.values[0];
        };
        let m = m as usize;
        if m >= self.n_max() {
            return self.v(self.n_max());
        }
        if h.cmp_inverse_power(self.base, m as u32) == std::cmp::Ordering::Equal {
            return self.values[m];
        }
        // r^{-(m+1)} < h < r^{-m}
        let t = (-h.to_f64().ln() / (self.base as f64).ln() - m as f64).clamp(0.0, 1.0);
        self.values[m] + t * (self.values[m + 1] - self.values[m])
    }

    pub fn sigma_l_f64(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(invalid(format!("h must be positive, got {h}")));
        }
        if h >= 1.0 {
            return Ok(self.values[0]);
        }
        Ok(self.sigma_l(&TorusPoint::from_f64(h)?))
    }
}

/// Exact dyadic point `u / 2^53` from one random draw.
pub(crate) fn uniform_point(rng: &mut StreamRng) -> TorusPoint {
    TorusPoint::from_ratio(rng.dyadic53() as u128, 1u128 << 53).expect("valid ratio")
}

/// Draws per chunk of the uniform-`x` experiments; chunk `c` reads stream `c`.
pub(crate) const CHUNK: usize = 4096;

/// Uniform points for sample indices `0..count`, generated chunk-wise in
/// parallel and reassembled in order.
pub(crate) fn map_uniform<T: Send>(count: usize, seed: u64, f: impl Fn(&TorusPoint) -> T + Sync) -> Vec<T> {
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = StreamRng::new(seed, c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len).map(|_| f(&uniform_point(&mut rng))).collect::<Vec<_>>()
        })
        .collect()
}

/// Monte Carlo integration of `w_n(x)^2` against the profile values.
pub fn profile_check_experiment(
    r: u32,
    seq: &WeightSequence,
    ns: &[usize],
    samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let n_max = ns.iter().copied().max().ok_or_else(|| invalid("need at least one n"))?;
    if samples < 10 {
        return Err(invalid("need at least 10 samples"));
    }
    let profile = variance_profile(r, seq, n_max)?;
    let weights = seq.values(n_max);
    let mut report = ExperimentReport::new(
        "profile",
        params! {"r" => r, "weights" => seq.kind().to_string(), "ns" => ns, "samples" => samples},
        seed,
        samples as u64,
    );
    // partial walks w_1..w_{n_max} for each x
    let walks: Vec<Vec<f64>> = map_uniform(samples, seed, |x| {
        let mut s = x.frac_stream(r);
        let mut w = 0.0;
        weights
            .iter()
            .map(|a| {
                w += if s.upper_half() { -a } else { *a };
                s.advance();
                w
            })
            .collect()
    });
    let mut table = Table::new("profile", &["n", "V_n", "mc_mean", "mc_se"]);
    for &n in ns {
        let sq: Vec<f64> = walks.iter().map(|w| w[n - 1] * w[n - 1]).collect();
        let (mean, se) = mean_se(&sq);
        let v = profile.values[n];
        table.push(vec![n as f64, v, mean, se]);
        report.check(Check::at_most(format!("|mean w_{n}^2 - V_{n}| / SE"), (mean - v).abs() / se, 3.0));
    }
    if r.is_multiple_of(2) {
        let exact = (1..=n_max).all(|n| profile.values[n] == seq.partial_energy(n));
        report.check(Check::at_least("V_n == A_n on the grid", exact as u8 as f64, 1.0));
    }
    report.table(table);
    Ok(report)
}
