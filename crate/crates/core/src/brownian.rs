//! Reference Brownian paths on arbitrary time grids.

use crate::error::{invalid, Result};
use crate::rng::StreamRng;

/// `B(t_0), ..., B(t_n)` for nondecreasing `t_0 >= 0`, with `B(0) = 0`.
pub fn brownian_path(times: &[f64], seed: u64, stream: u64) -> Result<Vec<f64>> {
    let mut rng = StreamRng::new(seed, stream);
    let mut prev = 0.0_f64;
    let mut b = 0.0_f64;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() || t < prev {
            return Err(invalid(format!("times must be finite, nonnegative and nondecreasing; got {t} after {prev}")));
        }
        let gap = t - prev;
        let z = rng.standard_normal();
        if gap > 0.0 {
            b += gap.sqrt() * z;
        }
        out.push(b);
        prev = t;
    }
    Ok(out)
}
