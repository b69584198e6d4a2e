//! Sample summaries and the Kolmogorov-Smirnov distance to N(0, 1).

use libm::erfc;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_n(x) - Phi(x)|`, evaluated on both sides of every jump.
pub fn ks_statistic(samples: &[f64]) -> Result<f64> {
    if samples.len() < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: samples.len() });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = normal_cdf(x);
        d = d.max(f - i as f64 / n).max(j as f64 / n - f);
        i = j;
    }
    Ok(d)
}

/// Sample mean and its standard error.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss = samples.iter().map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn variance(samples: &[f64]) -> f64 {
    let (_, se) = mean_se(samples);
    se * se * samples.len() as f64
}

/// Sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<CompensatedSum>().value() / (n - 1.0)
}

/// Linearly interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(samples: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect()
}

pub fn median(samples: &[f64]) -> f64 {
    quantiles(samples, &[0.5])[0]
}

/// Fraction of samples inside `[lo, hi]`.
pub fn fraction_within(samples: &[f64], lo: f64, hi: f64) -> f64 {
    samples.iter().filter(|&&x| x >= lo && x <= hi).count() as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        let v = normal_cdf(1.959963984540054);
        assert!((v - 0.975).abs() < 1e-12, "{v}");
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
        assert!((normal_cdf(-8.0) - 6.22096057427178e-16).abs() < 1e-25);
    }

    #[test]
    fn ks_on_quantile_grid() {
        let n = 10_000;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (1..=n).map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64)).collect();
        assert!(ks_statistic(&xs).unwrap() < 1e-3);
    }

    #[test]
    fn ks_point_mass_and_small_samples() {
        assert_eq!(ks_statistic(&[0.0; 20]).unwrap(), 0.5);
        assert!(matches!(ks_statistic(&[0.0; 5]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn summaries() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_se(&xs);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-14);
        assert_eq!(median(&xs), 2.5);
        assert_eq!(quantiles(&xs, &[0.0, 1.0]), vec![1.0, 4.0]);
        assert!((covariance(&xs, &xs) - 5.0 / 3.0).abs() < 1e-14);
        assert_eq!(fraction_within(&xs, 1.5, 3.0), 0.5);
    }
}
