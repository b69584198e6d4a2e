//! Deterministic step weights `a_k`, their partial energies
//! `A_n = a_1^2 + ... + a_n^2`, and finite-horizon diagnostics for the
//! growth assumptions `A_n -> inf` and `a_n^2 = O(A_n^{1-delta})`.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::{log_log_slope, CompensatedSum};

/// Slope above which the trailing log-log fit is read as divergence.
///
/// Ratios that converge from below still show a slope of order `1/n`, so
/// the threshold cannot be exactly zero.
pub const DIVERGENCE_SLOPE: f64 = 0.05;

/// Generator rule for `a_k`, `k >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `a_k = value`.
    #[serde(alias = "const")]
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `a_k = k^beta`.
    Power { beta: f64 },
    /// `a_k = value * (-1)^k`.
    Alternating {
        #[serde(default = "one")]
        value: f64,
    },
    /// `a_k = 1` for odd `k`, `0` for even `k`.
    #[serde(alias = "odd")]
    OddIndicator,
    /// Finite list; `a_k = 0` past its end.
    Explicit { values: Vec<f64> },
    /// `a_k = ratio^k`. Violates the growth assumption for `|ratio| > 1`.
    Geometric { ratio: f64 },
}

fn one() -> f64 {
    1.0
}

impl WeightKind {
    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self {
            WeightKind::Constant { value } => *value,
            WeightKind::Power { beta } => (k as f64).powf(*beta),
            WeightKind::Alternating { value } => {
                if k.is_multiple_of(2) {
                    *value
                } else {
                    -*value
                }
            }
            WeightKind::OddIndicator => (k % 2) as f64,
            WeightKind::Explicit { values } => values.get(k - 1).copied().unwrap_or(0.0),
            WeightKind::Geometric { ratio } => ratio.powi(k as i32),
        }
    }

    /// Number of meaningful weights, `None` for unbounded generators.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            WeightKind::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    fn check(&self) -> Result<()> {
        let finite = match self {
            WeightKind::Constant { value } | WeightKind::Alternating { value } => value.is_finite(),
            WeightKind::Power { beta } => beta.is_finite(),
            WeightKind::OddIndicator => true,
            WeightKind::Explicit { values } => values.iter().all(|v| v.is_finite()),
            WeightKind::Geometric { ratio } => ratio.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(invalid(format!("non-finite weight parameter in {self}")))
        }
    }
}

/// Short textual form used on the command line and in config files:
/// `const`, `const:2`, `power:0.5`, `alternating`, `odd`, `geometric:2`,
/// `explicit:1,0,1`. JSON objects such as `{"kind":"power","beta":0.5}`
/// are accepted as well.
impl FromStr for WeightKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let kind: WeightKind = serde_json::from_str(s)?;
            kind.check()?;
            return Ok(kind);
        }
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match a {
                Some(a) => a
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad number {a:?} in weights {s:?}"))),
                None => default.ok_or_else(|| invalid(format!("weights {name:?} need a parameter"))),
            }
        };
        let kind = match name {
            "const" | "constant" => WeightKind::Constant { value: num(arg, Some(1.0))? },
            "power" => WeightKind::Power { beta: num(arg, None)? },
            "alternating" | "alt" => WeightKind::Alternating { value: num(arg, Some(1.0))? },
            "odd" | "odd_indicator" => WeightKind::OddIndicator,
            "geometric" | "geom" => WeightKind::Geometric { ratio: num(arg, None)? },
            "explicit" => {
                let list = arg.ok_or_else(|| invalid("explicit weights need a value list"))?;
                let values = list
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| invalid(format!("bad weight value {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                WeightKind::Explicit { values }
            }
            other => return Err(invalid(format!("unknown weight generator {other:?}"))),
        };
        kind.check()?;
        Ok(kind)
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Constant { value } if *value == 1.0 => write!(f, "const"),
            WeightKind::Constant { value } => write!(f, "const:{value}"),
            WeightKind::Power { beta } => write!(f, "power:{beta}"),
            WeightKind::Alternating { value } if *value == 1.0 => write!(f, "alternating"),
            WeightKind::Alternating { value } => write!(f, "alternating:{value}"),
            WeightKind::OddIndicator => write!(f, "odd"),
            WeightKind::Geometric { ratio } => write!(f, "geometric:{ratio}"),
            WeightKind::Explicit { values } => {
                write!(f, "explicit:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug)]
struct Cache {
    /// `energy[n] = A_n`, with `energy[0] = 0`.
    energy: Vec<f64>,
    acc: CompensatedSum,
}

/// A weight sequence with a shared, lazily grown cache of partial energies.
///
/// Clones share the cache. Growth takes a write lock; once a prefix has been
/// materialized, lookups only take a read lock.
#[derive(Clone, Debug)]
pub struct WeightSequence {
    kind: WeightKind,
    cache: Arc<RwLock<Cache>>,
    delta_hint: Option<f64>,
    k_hint: Option<f64>,
}

impl PartialEq for WeightSequence {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl WeightSequence {
    pub fn new(kind: WeightKind) -> Result<Self> {
        kind.check()?;
        Ok(Self {
            kind,
            cache: Arc::new(RwLock::new(Cache { energy: vec![0.0], acc: CompensatedSum::new() })),
            delta_hint: None,
            k_hint: None,
        })
    }

    pub fn constant() -> Self {
        Self::new(WeightKind::Constant { value: 1.0 }).expect("finite")
    }

    pub fn power(beta: f64) -> Result<Self> {
        Self::new(WeightKind::Power { beta })
    }

    pub fn alternating() -> Self {
        Self::new(WeightKind::Alternating { value: 1.0 }).expect("finite")
    }

    pub fn odd_indicator() -> Self {
        Self::new(WeightKind::OddIndicator).expect("finite")
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(WeightKind::Explicit { values })
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        Self::new(WeightKind::Geometric { ratio })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn horizon(&self) -> Option<usize> {
        self.kind.horizon()
    }

    /// `(delta, K)` recorded by a passing [`validate_and_record`](Self::validate_and_record).
    pub fn hints(&self) -> Option<(f64, f64)> {
        self.delta_hint.zip(self.k_hint)
    }

    /// `a_k` for `k >= 1`.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.kind.value(k)
    }

    /// `a_1, ..., a_n`.
    pub fn values(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.kind.value(k)).collect()
    }

    fn ensure(&self, n: usize) {
        {
            let cache = self.cache.read().expect("weight cache poisoned");
            if cache.energy.len() > n {
                return;
            }
        }
        let mut cache = self.cache.write().expect("weight cache poisoned");
        let have = cache.energy.len();
        if have > n {
            return;
        }
        cache.energy.reserve(n + 1 - have);
        for k in have..=n {
            let a = self.kind.value(k);
            cache.acc.add(a * a);
            let value = cache.acc.value();
            cache.energy.push(value);
        }
    }

    /// `A_n`; `A_0 = 0`. Memoized.
    pub fn partial_energy(&self, n: usize) -> f64 {
        self.ensure(n);
        self.cache.read().expect("weight cache poisoned").energy[n]
    }

    /// `A_0, ..., A_n`.
    pub fn energies(&self, n: usize) -> Vec<f64> {
        self.ensure(n);
        self.cache.read().expect("weight cache poisoned").energy[..=n].to_vec()
    }

    /// Empirical constant `K_hat = max a_n^2 / A_n^{1-delta}` over `n <= n_max`
    /// (with `0/0 := 0`), plus a divergence verdict from the trailing quarter.
    pub fn validate_assumptions(&self, delta: f64, n_max: usize) -> Result<AssumptionReport> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
        }
        if n_max == 0 {
            return Err(invalid("n_max must be at least 1"));
        }
        let energy = self.energies(n_max);
        let ratio = |n: usize| -> f64 {
            let a = self.weight(n);
            let num = a * a;
            if num == 0.0 {
                0.0
            } else {
                num / energy[n].powf(1.0 - delta)
            }
        };
        let mut k_hat = 0.0_f64;
        let mut worst_index = 1;
        for n in 1..=n_max {
            let r = ratio(n);
            if r > k_hat || r.is_nan() {
                k_hat = r;
                worst_index = n;
            }
        }
        let start = trailing_start(n_max);
        let slope = log_log_slope((start..=n_max).map(|n| (n as f64, ratio(n))));
        let diverging = slope.is_some_and(|s| s > DIVERGENCE_SLOPE);
        Ok(AssumptionReport {
            delta,
            n_max,
            k_hat,
            worst_index,
            trailing_slope: slope,
            pass: k_hat.is_finite() && !diverging,
        })
    }

    /// Runs [`validate_assumptions`](Self::validate_assumptions) and, on a pass,
    /// records `(delta, K_hat)` as hints.
    pub fn validate_and_record(&mut self, delta: f64, n_max: usize) -> Result<AssumptionReport> {
        let report = self.validate_assumptions(delta, n_max)?;
        if report.pass {
            self.delta_hint = Some(delta);
            self.k_hint = Some(report.k_hat);
        }
        Ok(report)
    }

    /// Polynomial growth `A_n << n^{1/delta}` and the exponential bound
    /// `A_{n+k} <= A_n q^k` for `n0 <= n`, `n + k <= n_max`.
    pub fn growth_report(&self, delta: f64, q: f64, n0: usize, n_max: usize) -> Result<GrowthReport> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(invalid(format!("q must exceed 1, got {q}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
        }
        if n0 < 1 || n0 >= n_max {
            return Err(invalid(format!("need 1 <= n0 < n_max, got n0={n0}, n_max={n_max}")));
        }
        let energy = self.energies(n_max);
        let poly = |n: usize| energy[n] / (n as f64).powf(1.0 / delta);
        let (mut sup_poly, mut sup_index) = (0.0_f64, 1);
        for n in 1..=n_max {
            let v = poly(n);
            if v > sup_poly {
                sup_poly = v;
                sup_index = n;
            }
        }
        let start = trailing_start(n_max);
        let poly_slope = log_log_slope((start..=n_max).map(|n| (n as f64, poly(n))));
        let polynomial_pass = sup_poly.is_finite() && !poly_slope.is_some_and(|s| s > DIVERGENCE_SLOPE);

        // g[n] = max_{k >= 1, n + k <= n_max} ln A_{n+k} - k ln q, by a backward sweep.
        let ln_q = q.ln();
        let ln_a: Vec<f64> = energy.iter().map(|a| a.ln()).collect();
        let mut ok = vec![true; n_max + 1];
        let mut g = f64::NEG_INFINITY;
        for n in (1..n_max).rev() {
            g = g.max(ln_a[n + 1]) - ln_q;
            // Relative slack for round-off in the logs.
            ok[n] = g <= ln_a[n] + 1e-12 || g == f64::NEG_INFINITY;
        }
        let first_violation = (n0..n_max).find(|&n| !ok[n]);
        let mut min_admissible_n0 = None;
        for n in (1..n_max).rev() {
            if ok[n] {
                min_admissible_n0 = Some(n);
            } else {
                break;
            }
        }
        Ok(GrowthReport {
            delta,
            q,
            n0,
            n_max,
            sup_polynomial_ratio: sup_poly,
            sup_index,
            polynomial_slope: poly_slope,
            polynomial_pass,
            exponential_pass: first_violation.is_none(),
            first_violation,
            min_admissible_n0,
        })
    }
}

fn trailing_start(n_max: usize) -> usize {
    let quarter = (n_max / 4).max(1);
    (n_max + 1).saturating_sub(quarter + 1).max(1)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub delta: f64,
    pub n_max: usize,
    pub k_hat: f64,
    pub worst_index: usize,
    /// Slope of `ln(a_n^2 / A_n^{1-delta})` against `ln n` over the last quarter.
    pub trailing_slope: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub delta: f64,
    pub q: f64,
    pub n0: usize,
    pub n_max: usize,
    /// `sup_{n <= n_max} A_n / n^{1/delta}`.
    pub sup_polynomial_ratio: f64,
    pub sup_index: usize,
    pub polynomial_slope: Option<f64>,
    pub polynomial_pass: bool,
    pub exponential_pass: bool,
    pub first_violation: Option<usize>,
    /// Smallest `n0` for which the exponential bound holds on `[n0, n_max)`.
    pub min_admissible_n0: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_energy_examples() {
        assert_eq!(WeightSequence::constant().partial_energy(5), 5.0);
        assert_eq!(WeightSequence::power(1.0).unwrap().partial_energy(3), 14.0);
        assert_eq!(WeightSequence::odd_indicator().partial_energy(4), 2.0);
        assert_eq!(WeightSequence::constant().partial_energy(0), 0.0);
    }

    #[test]
    fn energy_increments_match_squares() {
        let gens = [
            WeightSequence::constant(),
            WeightSequence::power(0.5).unwrap(),
            WeightSequence::power(1.3).unwrap(),
            WeightSequence::alternating(),
            WeightSequence::odd_indicator(),
            WeightSequence::explicit(vec![0.3, -2.0, 5.5]).unwrap(),
        ];
        for seq in gens {
            let e = seq.energies(10_000);
            for n in 1..=10_000 {
                let a = seq.weight(n);
                assert!(e[n] >= e[n - 1]);
                let diff = e[n] - e[n - 1];
                assert!((diff - a * a).abs() <= 1e-12 * e[n].max(1.0), "{} at {n}", seq.kind());
            }
        }
    }

    #[test]
    fn validate_constant_weights() {
        let r = WeightSequence::constant().validate_assumptions(1.0, 100).unwrap();
        assert_eq!(r.k_hat, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn validate_geometric_fails() {
        let r = WeightSequence::geometric(2.0).unwrap().validate_assumptions(0.5, 60).unwrap();
        assert!(!r.pass);
        assert!(r.trailing_slope.unwrap() > 1.0);
    }

    #[test]
    fn validate_linear_weights() {
        let r = WeightSequence::power(1.0).unwrap().validate_assumptions(1.0 / 3.0, 10_000).unwrap();
        assert!(r.pass);
        assert!(r.k_hat.is_finite());
        // a_n^2 <= 3^{2/3} A_n^{2/3}
        assert!(r.k_hat <= 3f64.powf(2.0 / 3.0) + 1e-9);
    }

    #[test]
    fn validate_rejects_zero_horizon() {
        assert!(WeightSequence::constant().validate_assumptions(1.0, 0).is_err());
        assert!(WeightSequence::constant().validate_assumptions(0.0, 10).is_err());
    }

    #[test]
    fn zero_over_zero_is_zero() {
        let seq = WeightSequence::explicit(vec![0.0, 0.0, 1.0]).unwrap();
        let r = seq.validate_assumptions(0.5, 3).unwrap();
        assert_eq!(r.k_hat, 1.0);
        assert_eq!(r.worst_index, 3);
    }

    #[test]
    fn growth_examples() {
        let r = WeightSequence::constant().growth_report(1.0, 2.0, 1, 100).unwrap();
        assert!(r.polynomial_pass && r.exponential_pass);
        assert_eq!(r.sup_polynomial_ratio, 1.0);
        assert_eq!(r.min_admissible_n0, Some(1));

        let r = WeightSequence::power(1.0).unwrap().growth_report(1.0 / 3.0, 2.0, 4, 1000).unwrap();
        assert!(r.polynomial_pass && r.exponential_pass);
        // A_3 / A_2 = 2.8 and A_4 / A_3 = 30/14 exceed q = 2
        assert_eq!(r.min_admissible_n0, Some(4));

        // A_{n+1}/A_n -> 4 > 3: both verdicts fail.
        let r = WeightSequence::geometric(2.0).unwrap().growth_report(1.0, 3.0, 1, 40).unwrap();
        assert!(!r.exponential_pass);
        assert!(!r.polynomial_pass);
        assert_eq!(r.min_admissible_n0, None);
    }

    #[test]
    fn growth_rejects_bad_q() {
        assert!(WeightSequence::constant().growth_report(1.0, 1.0, 1, 10).is_err());
        assert!(WeightSequence::constant().growth_report(1.0, 2.0, 10, 10).is_err());
    }

    #[test]
    fn hints_recorded_on_pass() {
        let mut seq = WeightSequence::constant();
        seq.validate_and_record(1.0, 50).unwrap();
        assert_eq!(seq.hints(), Some((1.0, 1.0)));
        let mut bad = WeightSequence::geometric(2.0).unwrap();
        bad.validate_and_record(0.5, 60).unwrap();
        assert_eq!(bad.hints(), None);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["const", "const:2", "power:0.5", "alternating", "odd", "geometric:2", "explicit:1,0,1.5"] {
            let k: WeightKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        let k: WeightKind = r#"{"kind":"power","beta":0.5}"#.parse().unwrap();
        assert_eq!(k, WeightKind::Power { beta: 0.5 });
        let k: WeightKind = r#"{"kind":"explicit","values":[1,2]}"#.parse().unwrap();
        assert_eq!(k.horizon(), Some(2));
        assert!("bogus".parse::<WeightKind>().is_err());
        assert!("power".parse::<WeightKind>().is_err());
    }

    #[test]
    fn abel_dini_pringsheim() {
        let seq = WeightSequence::constant();
        let n = 10_000;
        let e = seq.energies(8 * n);
        // sum a_k^2 / (A_k A_{k-1}^eps), eps = 0.5, starting at k = 2 (A_1 > 0)
        let conv = |from: usize, to: usize| -> f64 {
            (from..=to).map(|k| 1.0 / (e[k] * e[k - 1].sqrt())).sum()
        };
        // comparison with the integral of k^{-3/2}
        assert!(conv(n, 2 * n) <= 2.0 / ((n - 1) as f64).sqrt());
        assert!(conv(4 * n, 8 * n) < conv(n, 2 * n) * 0.51);
        let harmonic: f64 = (1..=n).map(|k| 1.0 / e[k]).sum();
        assert!(harmonic >= 9.0);
    }

    #[test]
    fn running_max_bound_holds() {
        let seq = WeightSequence::power(1.0).unwrap();
        let delta = 1.0 / 3.0;
        let r = seq.validate_assumptions(delta, 2000).unwrap();
        let e = seq.energies(2000);
        let mut max_sq = 0.0_f64;
        for n in 1..=2000 {
            max_sq = max_sq.max(seq.weight(n).powi(2));
            assert!(max_sq <= r.k_hat * e[n].powf(1.0 - delta) * (1.0 + 1e-12));
        }
    }
}
