//! Weighted Takagi-van der Waerden functions
//!
//! ```text
//! f(x) = sum_{k>=1} a_k psi_k(x),   psi_k(x) = d(r^{k-1} x) / r^{k-1},
//! ```
//!
//! where `d` is the distance to the nearest integer, together with the
//! right-hand slopes `psi_k^+`, r-ary digit machinery and the exact
//! three-term split of an increment `f(x+h) - f(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;
use crate::point::TorusPoint;
use crate::weights::WeightSequence;

/// Term budget for tail certification.
pub const MAX_TERMS: usize = 10_000;

/// Distance from `x` to the nearest integer.
pub fn dist_nearest_int(x: f64) -> f64 {
    let f = x - x.floor();
    f.min(1.0 - f)
}

#[derive(Clone, Debug)]
pub struct FractalFunction {
    base: u32,
    weights: WeightSequence,
}

/// Certified value of `f(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub certified_error: f64,
    pub terms: usize,
}

/// A truncation index `N` with `(1/2) sum_{k>N} |a_k| r^{-(k-1)} <= tail_bound`.
#[derive(Clone, Debug)]
pub struct Truncation {
    base: u32,
    terms: usize,
    tail_bound: f64,
    /// `a_k r^{-(k-1)}` for `k = 1..=terms`.
    coeffs: Vec<f64>,
    /// Sum of `|a_k| r^{-(k-1)} / 2` over the kept terms, for the round-off bound.
    abs_mass: f64,
}

impl FractalFunction {
    pub fn new(base: u32, weights: WeightSequence) -> Result<Self> {
        if base < 2 {
            return Err(invalid(format!("base must be at least 2, got {base}")));
        }
        Ok(Self { base, weights })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    pub fn is_even(&self) -> bool {
        self.base.is_multiple_of(2)
    }

    /// Memory parameter of the slope walk: 1/2 for even bases, `(r+1)/(2r)` for odd.
    pub fn memory_parameter(&self) -> f64 {
        memory_parameter(self.base)
    }

    /// Truncation certified to `eps`, using at most [`MAX_TERMS`] terms.
    pub fn truncation(&self, eps: f64) -> Result<Truncation> {
        self.truncation_with_budget(eps, MAX_TERMS)
    }

    /// Direct summation of the tail terms `t_k = |a_k| r^{-(k-1)} / 2` until
    /// they drop below `eps (1 - 1/r) / 4`, then a geometric closure: if
    /// `A_{M+j} <= A_M q^j` holds over a lookahead window with `sqrt(q) < r`,
    /// then `sum_{j>=1} t_{M+j} <= sqrt(A_M) r^{-(M-1)} rho / (2 (1 - rho))`
    /// with `rho = sqrt(q)/r`, because `a_n^2 <= A_n`.
    pub fn truncation_with_budget(&self, eps: f64, max_terms: usize) -> Result<Truncation> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        let r = self.base as f64;
        let small = eps * (1.0 - 1.0 / r) / 4.0;
        let scan = max_terms + lookahead(max_terms) + 1;
        let energy = self.weights.energies(scan);
        let mut t = Vec::with_capacity(64);
        let mut inv_pow = 1.0_f64; // r^{-(k-1)}
        for k in 1..=max_terms {
            let a = self.weights.weight(k);
            t.push(0.5 * a.abs() * inv_pow);
            if t[k - 1] < small {
                if let Some(closure) = closure_bound(&energy, k, self.base, inv_pow) {
                    if closure <= eps / 4.0 {
                        // smallest N <= k with sum_{N<j<=k} t_j + closure <= eps/2
                        let mut tail = closure;
                        let mut n = k;
                        while n > 0 && tail + t[n - 1] <= eps / 2.0 {
                            tail += t[n - 1];
                            n -= 1;
                        }
                        let coeffs: Vec<f64> = (1..=n)
                            .map(|j| self.weights.weight(j) * r.powi(-(j as i32 - 1)))
                            .collect();
                        let abs_mass = t[..n].iter().sum();
                        return Ok(Truncation { base: self.base, terms: n, tail_bound: tail, coeffs, abs_mass });
                    }
                }
            }
            inv_pow /= r;
        }
        Err(Error::Uncertified { max_terms })
    }

    /// `f(x)` with `|value - f(x)| <= certified_error <= eps`.
    pub fn eval(&self, x: &TorusPoint, eps: f64) -> Result<Evaluation> {
        let tr = self.truncation(eps)?;
        Ok(tr.eval(x))
    }

    pub fn eval_f64(&self, x: f64, eps: f64) -> Result<Evaluation> {
        self.eval(&TorusPoint::from_f64(x)?, eps)
    }

    /// Signs `psi_k^+(x)` for `k = 1..=n`.
    pub fn sign_walk(&self, x: &TorusPoint, n: usize) -> Vec<i8> {
        sign_walk(self.base, x, n)
    }

    /// `w_n(x) = sum_{k<=n} a_k psi_k^+(x)`.
    pub fn weighted_walk(&self, x: &TorusPoint, n: usize) -> f64 {
        let mut stream = x.frac_stream(self.base);
        let mut acc = CompensatedSum::new();
        for k in 1..=n {
            let s = if stream.upper_half() { -1.0 } else { 1.0 };
            acc.add(self.weights.weight(k) * s);
            stream.advance();
        }
        acc.value()
    }

    /// Splits `f(x+h) - f(x)` into the linear, midrange and tail terms.
    pub fn decompose_increment(&self, x: &TorusPoint, h: &TorusPoint, eps: f64) -> Result<IncrementDecomposition> {
        let r = self.base;
        if h.is_zero() || h.cmp_inverse_power(r, 1) != std::cmp::Ordering::Less {
            return Err(invalid(format!("h must lie in (0, 1/{r}), got {}", h.to_f64())));
        }
        let m = h.scale_index(r).expect("h > 0") as usize;
        let k0 = match_depth(r, x, h)?;
        let k0_hat = if self.is_even() { None } else { Some(match_depth_shifted(r, x, h)?) };
        let linear_depth = k0_hat.map_or(k0, |kh| k0.min(kh));

        let tr = self.truncation(eps)?;
        let (xh, _) = x.add_mod1(h);
        let total = tr.terms.max(m);
        let hf = h.to_f64();
        let rf = r as f64;

        let mut lin = CompensatedSum::new();
        let mut mid = CompensatedSum::new();
        let mut tail = CompensatedSum::new();
        let mut defect = CompensatedSum::new();
        let mut s0 = x.frac_stream(r);
        let mut s1 = xh.frac_stream(r);
        let mut inv_pow = 1.0_f64;
        for k in 1..=total {
            let a = self.weights.weight(k);
            let slope = if s0.upper_half() { -1.0 } else { 1.0 };
            let dpsi = (s1.dist() - s0.dist()) * inv_pow;
            if k <= m {
                lin.add(a * slope);
                let dev = a * (dpsi - hf * slope);
                if (k as i64) <= linear_depth {
                    defect.add(dev);
                } else {
                    mid.add(dev);
                }
            } else {
                tail.add(a * dpsi);
            }
            s0.advance();
            s1.advance();
            inv_pow /= rf;
        }
        let linear = hf * lin.value();
        let midrange = mid.value();
        let tail_term = tail.value();
        let fx = tr.eval(x);
        let fxh = tr.eval(&xh);
        let increment = fxh.value - fx.value;
        let residual = increment - (linear + midrange + tail_term);
        Ok(IncrementDecomposition {
            m,
            k0,
            k0_hat,
            linear_depth,
            linear,
            midrange,
            tail: tail_term,
            linear_regime_defect: defect.value(),
            increment,
            residual,
            error_budget: 4.0 * eps,
        })
    }
}

impl Truncation {
    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn eval(&self, x: &TorusPoint) -> Evaluation {
        let mut stream = x.frac_stream(self.base);
        let mut acc = CompensatedSum::new();
        for c in &self.coeffs {
            acc.add(c * stream.dist());
            stream.advance();
        }
        let value = acc.value();
        // a few ulps per term on top of the compensated sum
        let rounding = 4.0 * f64::EPSILON * self.abs_mass + f64::EPSILON * value.abs();
        Evaluation { value, certified_error: self.tail_bound + rounding, terms: self.terms }
    }
}

fn lookahead(m: usize) -> usize {
    m.max(64)
}

fn closure_bound(energy: &[f64], m: usize, base: u32, inv_pow: f64) -> Option<f64> {
    let a_m = energy[m];
    let r = base as f64;
    if a_m == 0.0 {
        // closure needs all later weights to vanish over the window
        let end = (m + lookahead(m)).min(energy.len() - 1);
        return (energy[end] == 0.0).then_some(0.0);
    }
    let end = (m + lookahead(m)).min(energy.len() - 1);
    let mut q = 1.0_f64;
    for j in 1..=(end - m) {
        q = q.max((energy[m + j] / a_m).powf(1.0 / j as f64));
    }
    let rho = q.sqrt() / r;
    if rho >= 1.0 {
        return None;
    }
    Some(0.5 * a_m.sqrt() * inv_pow * rho / (1.0 - rho))
}

pub fn memory_parameter(base: u32) -> f64 {
    if base.is_multiple_of(2) {
        0.5
    } else {
        let r = base as f64;
        (r + 1.0) / (2.0 * r)
    }
}

/// `psi_k(x) = d(r^{k-1} x) / r^{k-1}`.
pub fn psi(r: u32, k: usize, x: &TorusPoint) -> f64 {
    assert!(k >= 1, "k starts at 1");
    let mut s = x.frac_stream(r);
    for _ in 1..k {
        s.advance();
    }
    s.dist() * (r as f64).powi(-(k as i32 - 1))
}

/// Right-hand slope `psi_k^+(x)`: `+1` on `[0, 1/2)` of `frac(r^{k-1} x)`, else `-1`.
pub fn psi_slope(r: u32, k: usize, x: &TorusPoint) -> i8 {
    assert!(k >= 1, "k starts at 1");
    let mut s = x.frac_stream(r);
    for _ in 1..k {
        s.advance();
    }
    if s.upper_half() {
        -1
    } else {
        1
    }
}

/// `(psi_k^+(x))_{k=1..n}`, computed from the exact digit stream.
pub fn sign_walk(r: u32, x: &TorusPoint, n: usize) -> Vec<i8> {
    let mut s = x.frac_stream(r);
    (0..n)
        .map(|_| {
            let sign = if s.upper_half() { -1 } else { 1 };
            s.advance();
            sign
        })
        .collect()
}

/// Canonical r-ary expansion `x = sum_{k>=1} eps_k r^{-k}` (no trailing
/// run of `r-1` digits), with `eps_0 = 0`.
#[derive(Clone, Debug)]
pub struct DigitExpansion {
    base: u32,
    point: TorusPoint,
}

impl DigitExpansion {
    pub fn new(base: u32, point: TorusPoint) -> Result<Self> {
        if base < 2 {
            return Err(invalid(format!("base must be at least 2, got {base}")));
        }
        Ok(Self { base, point })
    }

    pub fn point(&self) -> &TorusPoint {
        &self.point
    }

    /// `eps_1, ..., eps_len`.
    pub fn digits(&self, len: usize) -> Vec<u32> {
        let mut s = self.point.frac_stream(self.base);
        (0..len).map(|_| s.advance()).collect()
    }

    /// `sum_{k<=len} eps_k r^{-k}`, within `r^{-len}` of the point.
    pub fn reconstruct(&self, len: usize) -> f64 {
        let r = self.base as f64;
        let mut acc = CompensatedSum::new();
        let mut scale = 1.0;
        for d in self.digits(len) {
            scale /= r;
            acc.add(d as f64 * scale);
        }
        acc.value()
    }
}

/// Length `k_0` of the common r-ary prefix of `x` and `x + h` (on the circle);
/// `-1` when `x + h` passes 1.
pub fn match_depth(r: u32, x: &TorusPoint, h: &TorusPoint) -> Result<i64> {
    if r < 2 {
        return Err(invalid(format!("base must be at least 2, got {r}")));
    }
    if h.is_zero() {
        return Err(invalid("h must be positive"));
    }
    let (xh, wrapped) = x.add_mod1(h);
    if wrapped {
        return Ok(-1);
    }
    let mut a = x.frac_stream(r);
    let mut b = xh.frac_stream(r);
    let mut k = 0i64;
    // the points differ, so their canonical digits differ at a finite index
    while a.advance() == b.advance() {
        k += 1;
    }
    Ok(k)
}

/// `k_0(x + 1/2, h)`: the odd-base correction.
pub fn match_depth_shifted(r: u32, x: &TorusPoint, h: &TorusPoint) -> Result<i64> {
    let half = TorusPoint::from_ratio(1, 2)?;
    let (shifted, _) = x.add_mod1(&half);
    match_depth(r, &shifted, h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementDecomposition {
    /// `m(h)`, with `r^{-(m+1)} < h <= r^{-m}`.
    pub m: usize,
    pub k0: i64,
    /// `k_0(x + 1/2, h)`, odd bases only.
    pub k0_hat: Option<i64>,
    /// `k_0` for even bases, `min(k_0, k0_hat)` for odd ones.
    pub linear_depth: i64,
    /// `h w_m(x)`.
    pub linear: f64,
    /// `sum_{linear_depth < k <= m} a_k (psi_k(x+h) - psi_k(x) - h psi_k^+(x))`.
    pub midrange: f64,
    /// `sum_{k > m} a_k (psi_k(x+h) - psi_k(x))`, truncated at the certified index.
    pub tail: f64,
    /// Same summand as `midrange` over `k <= linear_depth`; zero up to round-off.
    pub linear_regime_defect: f64,
    /// Certified `f(x+h) - f(x)`.
    pub increment: f64,
    pub residual: f64,
    pub error_budget: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> TorusPoint {
        TorusPoint::from_f64(x).unwrap()
    }

    fn takagi(r: u32) -> FractalFunction {
        FractalFunction::new(r, WeightSequence::constant()).unwrap()
    }

    #[test]
    fn dist_examples() {
        assert!((dist_nearest_int(0.3) - 0.3).abs() < 1e-15);
        assert_eq!(dist_nearest_int(0.5), 0.5);
        assert!((dist_nearest_int(1.7) - 0.3).abs() < 1e-15);
        assert!((dist_nearest_int(-0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let f = takagi(2);
        let e = f.eval_f64(0.5, 1e-12).unwrap();
        assert!((e.value - 0.5).abs() <= 1e-12);
        assert!(e.certified_error <= 1e-12);
        let e = f.eval_f64(0.25, 1e-12).unwrap();
        assert!((e.value - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn eval_one_third_against_partial_sum_oracle() {
        // 200-term partial sum in rationals; tail <= sum_{k>200} 2^{-k} = 2^{-200}.
        let f = takagi(2);
        let x = TorusPoint::from_ratio(1, 3).unwrap();
        let e = f.eval(&x, 1e-12).unwrap();
        // frac(2^{k-1}/3) alternates 1/3, 2/3: every d equals 1/3
        let oracle: f64 = (0..200).map(|k| (1.0 / 3.0) * 0.5f64.powi(k)).sum();
        assert!((oracle - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.value - oracle).abs() <= 1e-12);
    }

    #[test]
    fn eval_rejects_divergent_weights() {
        let f = FractalFunction::new(2, WeightSequence::geometric(2.0).unwrap()).unwrap();
        assert!(matches!(f.truncation_with_budget(1e-9, 200), Err(Error::Uncertified { .. })));
        // 1.5^k with r = 2 still converges
        let f = FractalFunction::new(2, WeightSequence::geometric(1.5).unwrap()).unwrap();
        assert!(f.truncation(1e-9).is_ok());
    }

    #[test]
    fn eval_zero_weights() {
        let f = FractalFunction::new(3, WeightSequence::explicit(vec![]).unwrap()).unwrap();
        assert_eq!(f.eval_f64(0.3, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn slope_examples() {
        assert_eq!(psi_slope(2, 1, &pt(0.1)), 1);
        assert_eq!(psi_slope(2, 1, &pt(0.6)), -1);
        assert_eq!(psi_slope(3, 2, &TorusPoint::from_ratio(1, 5).unwrap()), -1);
        // right-hand branch at the kink
        assert_eq!(psi_slope(2, 1, &pt(0.5)), -1);
    }

    #[test]
    fn sign_walk_examples() {
        assert_eq!(sign_walk(2, &pt(0.0), 3), vec![1, 1, 1]);
        // 0.75 = 0.11b: frac(0.75) >= 1/2, frac(1.5) = 0.5 >= 1/2, then 0
        assert_eq!(sign_walk(2, &pt(0.75), 3), vec![-1, -1, 1]);
    }

    #[test]
    fn sign_walk_deep_is_exact() {
        // 1/3 in base 2: frac alternates 1/3, 2/3
        let s = sign_walk(2, &TorusPoint::from_ratio(1, 3).unwrap(), 10_000);
        for (i, v) in s.iter().enumerate() {
            assert_eq!(*v, if i % 2 == 0 { 1 } else { -1 });
        }
    }

    #[test]
    fn weighted_walk_examples() {
        assert_eq!(takagi(2).weighted_walk(&pt(0.0), 5), 5.0);
        let lin = FractalFunction::new(2, WeightSequence::power(1.0).unwrap()).unwrap();
        let signs = sign_walk(2, &pt(0.75), 2);
        let dot: f64 = signs.iter().enumerate().map(|(i, s)| (i + 1) as f64 * *s as f64).sum();
        assert_eq!(lin.weighted_walk(&pt(0.75), 2), dot);
        let zero = FractalFunction::new(5, WeightSequence::new(crate::weights::WeightKind::Constant { value: 0.0 }).unwrap()).unwrap();
        assert_eq!(zero.weighted_walk(&pt(0.3), 7), 0.0);
    }

    #[test]
    fn match_depth_examples() {
        let q = |a, b| TorusPoint::from_ratio(a, b).unwrap();
        assert_eq!(match_depth(2, &pt(0.0), &q(1, 4)).unwrap(), 1);
        assert_eq!(match_depth(2, &pt(0.9), &pt(0.2)).unwrap(), -1);
        assert_eq!(match_depth(3, &q(1, 3), &q(1, 9)).unwrap(), 1);
        assert!(match_depth(2, &pt(0.1), &TorusPoint::zero()).is_err());
    }

    #[test]
    fn shifted_match_depth_examples() {
        let q = |a, b| TorusPoint::from_ratio(a, b).unwrap();
        assert_eq!(
            match_depth_shifted(3, &pt(0.0), &q(1, 9)).unwrap(),
            match_depth(3, &q(1, 2), &q(1, 9)).unwrap()
        );
        assert_eq!(
            match_depth_shifted(3, &q(1, 2), &q(1, 27)).unwrap(),
            match_depth(3, &pt(0.0), &q(1, 27)).unwrap()
        );
    }

    #[test]
    fn digit_expansion_reconstructs() {
        let d = DigitExpansion::new(3, pt(0.123456789)).unwrap();
        for len in [5, 10, 20, 30] {
            assert!((d.reconstruct(len) - 0.123456789).abs() <= 3f64.powi(-(len as i32)) + 1e-16);
        }
        // 1/2 in base 3 = 0.111...
        let d = DigitExpansion::new(3, TorusPoint::from_ratio(1, 2).unwrap()).unwrap();
        assert_eq!(d.digits(5), vec![1; 5]);
        // canonical: 1/2 in base 2 is 0.1000..., never 0.0111...
        let d = DigitExpansion::new(2, pt(0.5)).unwrap();
        assert_eq!(d.digits(4), vec![1, 0, 0, 0]);
    }

    #[test]
    fn decomposition_examples() {
        let f = takagi(2);
        let d = f
            .decompose_increment(&TorusPoint::from_ratio(1, 3).unwrap(), &TorusPoint::inverse_power(2, 6).unwrap(), 1e-12)
            .unwrap();
        assert_eq!(d.m, 6);
        assert!(d.residual.abs() <= 4e-12, "{d:?}");
        assert!(f.decompose_increment(&pt(0.0), &pt(0.5), 1e-12).is_err());
        assert!(f.decompose_increment(&pt(0.0), &TorusPoint::zero(), 1e-12).is_err());
    }

    #[test]
    fn linear_regime_is_exact_for_dyadic_points() {
        let f = FractalFunction::new(2, WeightSequence::power(0.5).unwrap()).unwrap();
        for (x, h) in [(0.3125, 2f64.powi(-9)), (0.0, 0.0625), (0.71875, 0.001953125 * 3.0)] {
            let d = f.decompose_increment(&pt(x), &pt(h), 1e-12).unwrap();
            assert_eq!(d.linear_regime_defect, 0.0, "{x} {h}");
        }
    }

    #[test]
    fn memory_parameter_cases() {
        assert_eq!(memory_parameter(2), 0.5);
        assert_eq!(memory_parameter(10), 0.5);
        assert!((memory_parameter(3) - 2.0 / 3.0).abs() < 1e-15);
    }
}
