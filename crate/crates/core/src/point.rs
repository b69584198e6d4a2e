//! Exact points of the circle `R/Z`.
//!
//! Sign patterns, digit expansions and match depths are discontinuous in
//! `x`, so they are computed from an exact rational representation rather
//! than from repeated floating-point multiplication. Every finite `f64` in
//! `[0, 1)` is a dyadic rational and converts without loss; rationals such as
//! `1/3` can be built directly.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    Small { num: u128, den: u128 },
    Big { num: BigUint, den: BigUint },
}

/// A point `num/den` of `[0, 1)` in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusPoint(Repr);

fn big_ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    // q = floor(num 2^s / den) carries 66 to 67 bits; a sticky low bit keeps
    // the conversion to 53 bits correctly rounded outside the subnormal range.
    let s = 66 + den.bits() as i64 - num.bits() as i64;
    let scaled = if s >= 0 { num << s as u64 } else { num >> (-s) as u64 };
    let (q, rem) = scaled.div_rem(den);
    let mut q = q.to_u128().expect("67-bit quotient");
    if !rem.is_zero() || (s < 0 && num.trailing_zeros().unwrap_or(0) < (-s) as u64) {
        q |= 1;
    }
    let mut value = q as f64;
    let mut e = -s;
    while e < -1000 {
        value *= 2f64.powi(-1000);
        e += 1000;
    }
    value * 2f64.powi(e as i32)
}

impl TorusPoint {
    pub fn zero() -> Self {
        TorusPoint(Repr::Small { num: 0, den: 1 })
    }

    /// Exact conversion of `x` in `[0, 1)`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() || !(0.0..1.0).contains(&x) {
            return Err(invalid(format!("point must lie in [0, 1), got {x}")));
        }
        if x == 0.0 {
            return Ok(Self::zero());
        }
        let bits = x.to_bits();
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        // x = mantissa * 2^exp
        let (mut mantissa, mut exp) = if exp_bits == 0 {
            (frac, -1074_i64)
        } else {
            (frac | (1u64 << 52), exp_bits - 1075)
        };
        let tz = mantissa.trailing_zeros();
        mantissa >>= tz;
        exp += tz as i64;
        let den_pow = (-exp) as u64;
        if den_pow <= 120 {
            Ok(TorusPoint(Repr::Small { num: mantissa as u128, den: 1u128 << den_pow }))
        } else {
            Ok(TorusPoint(Repr::Big { num: BigUint::from(mantissa), den: BigUint::one() << den_pow }))
        }
    }

    /// `num/den` reduced modulo one.
    pub fn from_ratio(num: u128, den: u128) -> Result<Self> {
        if den == 0 {
            return Err(invalid("zero denominator"));
        }
        let num = num % den;
        let g = num.gcd(&den);
        Ok(TorusPoint(Repr::Small { num: num / g, den: den / g }))
    }

    pub fn from_big_ratio(num: BigUint, den: BigUint) -> Result<Self> {
        if den.is_zero() {
            return Err(invalid("zero denominator"));
        }
        let num = num % &den;
        let g = num.gcd(&den);
        Ok(Self::normalize(num / &g, den / g))
    }

    /// `r^{-m}` (reduced modulo one, so `m = 0` gives zero).
    pub fn inverse_power(r: u32, m: u32) -> Result<Self> {
        if r < 2 {
            return Err(invalid(format!("base must be at least 2, got {r}")));
        }
        let den = BigUint::from(r).pow(m);
        Self::from_big_ratio(BigUint::one(), den)
    }

    fn normalize(num: BigUint, den: BigUint) -> Self {
        match (num.to_u128(), den.to_u128()) {
            (Some(n), Some(d)) => TorusPoint(Repr::Small { num: n, den: d }),
            _ => TorusPoint(Repr::Big { num, den }),
        }
    }

    fn parts(&self) -> (BigUint, BigUint) {
        match &self.0 {
            Repr::Small { num, den } => (BigUint::from(*num), BigUint::from(*den)),
            Repr::Big { num, den } => (num.clone(), den.clone()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num == 0,
            Repr::Big { num, .. } => num.is_zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small { num, den } => {
                if *den <= 1u128 << 64 {
                    *num as f64 / *den as f64
                } else {
                    big_ratio_f64(&BigUint::from(*num), &BigUint::from(*den))
                }
            }
            Repr::Big { num, den } => big_ratio_f64(num, den),
        }
    }

    /// `self + other` on the circle, and whether the real sum reached 1.
    pub fn add_mod1(&self, other: &TorusPoint) -> (TorusPoint, bool) {
        if let (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) = (&self.0, &other.0) {
            let g = b.gcd(d);
            let lcm = (b / g).checked_mul(*d);
            if let Some(l) = lcm {
                let x = a.checked_mul(l / b);
                let y = c.checked_mul(l / d);
                if let (Some(x), Some(y)) = (x, y) {
                    if let Some(s) = x.checked_add(y) {
                        let wrapped = s >= l;
                        let s = if wrapped { s - l } else { s };
                        let g = s.gcd(&l);
                        return (TorusPoint(Repr::Small { num: s / g, den: l / g }), wrapped);
                    }
                }
            }
        }
        let (a, b) = self.parts();
        let (c, d) = other.parts();
        let l = b.lcm(&d);
        let s = a * (&l / &b) + c * (&l / &d);
        let wrapped = s >= l;
        let s = if wrapped { s - &l } else { s };
        let g = s.gcd(&l);
        (Self::normalize(s / &g, l / g), wrapped)
    }

    /// Compares the point with `r^{-m}`.
    pub fn cmp_inverse_power(&self, r: u32, m: u32) -> Ordering {
        let (num, den) = self.parts();
        (num * BigUint::from(r).pow(m)).cmp(&den)
    }

    /// The unique `m` with `r^{-(m+1)} < h <= r^{-m}`, by exact integer
    /// comparison. `None` for `h = 0`.
    pub fn scale_index(&self, r: u32) -> Option<u32> {
        if self.is_zero() {
            return None;
        }
        let (num, den) = self.parts();
        let rb = BigUint::from(r);
        let mut scaled = num;
        let mut m = 0u32;
        loop {
            let next = &scaled * &rb;
            if next > den {
                return Some(m);
            }
            scaled = next;
            m += 1;
        }
    }

    /// Iterator state for `frac(r^k x)`, `k = 0, 1, ...`.
    pub fn frac_stream(&self, r: u32) -> FracStream {
        let rr = r as u128;
        match &self.0 {
            Repr::Small { num, den } => {
                if den.is_power_of_two() {
                    let shift = den.trailing_zeros();
                    if shift + (128 - rr.leading_zeros()) <= 128 {
                        return FracStream::Pow2 { rem: *num, shift, r: rr };
                    }
                }
                if den.checked_mul(rr).is_some() {
                    return FracStream::Small { rem: *num, den: *den, r: rr };
                }
                FracStream::Big { rem: BigUint::from(*num), den: BigUint::from(*den), r }
            }
            Repr::Big { num, den } => FracStream::Big { rem: num.clone(), den: den.clone(), r },
        }
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small { num, den } => write!(f, "{num}/{den}"),
            Repr::Big { num, den } => write!(f, "{num}/{den}"),
        }
    }
}

/// Accepts `p/q`, `r^-m` and decimal literals in `[0, 1)`.
impl FromStr for TorusPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((base, exp)) = s.split_once('^') {
            let r: u32 = base.trim().parse().map_err(|_| invalid(format!("bad base in {s:?}")))?;
            let e: i64 = exp.trim().parse().map_err(|_| invalid(format!("bad exponent in {s:?}")))?;
            if e > 0 {
                return Err(invalid(format!("{s:?} is not in [0, 1)")));
            }
            return Self::inverse_power(r, (-e) as u32);
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: BigUint = p.trim().parse().map_err(|_| invalid(format!("bad numerator in {s:?}")))?;
            let q: BigUint = q.trim().parse().map_err(|_| invalid(format!("bad denominator in {s:?}")))?;
            if p >= q {
                return Err(invalid(format!("{s:?} is not in [0, 1)")));
            }
            return Self::from_big_ratio(p, q);
        }
        let x: f64 = s.parse().map_err(|_| invalid(format!("bad point {s:?}")))?;
        Self::from_f64(x)
    }
}

/// Successive fractional parts `frac(r^k x)` held exactly as `rem/den`.
#[derive(Clone, Debug)]
pub enum FracStream {
    Pow2 { rem: u128, shift: u32, r: u128 },
    Small { rem: u128, den: u128, r: u128 },
    Big { rem: BigUint, den: BigUint, r: u32 },
}

impl FracStream {
    /// Whether the current fractional part is at least 1/2.
    #[inline]
    pub fn upper_half(&self) -> bool {
        match self {
            FracStream::Pow2 { rem, shift, .. } => *shift > 0 && (*rem >> (*shift - 1)) != 0,
            FracStream::Small { rem, den, .. } => *rem >= *den - *rem,
            FracStream::Big { rem, den, .. } => rem * 2u32 >= *den,
        }
    }

    /// Distance from the current value to the nearest integer.
    #[inline]
    pub fn dist(&self) -> f64 {
        match self {
            FracStream::Pow2 { rem, shift, .. } => {
                let den = 1u128 << *shift;
                let near = (*rem).min(den - *rem);
                near as f64 / den as f64
            }
            FracStream::Small { rem, den, .. } => {
                let near = (*rem).min(*den - *rem);
                near as f64 / *den as f64
            }
            FracStream::Big { rem, den, .. } => {
                let other = den - rem;
                let near = if *rem <= other { rem.clone() } else { other };
                big_ratio_f64(&near, den)
            }
        }
    }

    /// Current fractional part as a float.
    pub fn value(&self) -> f64 {
        match self {
            FracStream::Pow2 { rem, shift, .. } => *rem as f64 / (1u128 << *shift) as f64,
            FracStream::Small { rem, den, .. } => *rem as f64 / *den as f64,
            FracStream::Big { rem, den, .. } => big_ratio_f64(rem, den),
        }
    }

    /// Multiplies by `r`, keeps the fractional part and returns the digit
    /// that moved into the integer part.
    #[inline]
    pub fn advance(&mut self) -> u32 {
        match self {
            FracStream::Pow2 { rem, shift, r } => {
                let t = *rem * *r;
                let digit = if *shift == 128 { 0 } else { t >> *shift };
                *rem = if *shift == 128 { t } else { t & ((1u128 << *shift) - 1) };
                digit as u32
            }
            FracStream::Small { rem, den, r } => {
                let t = *rem * *r;
                let digit = t / *den;
                *rem = t - digit * *den;
                digit as u32
            }
            FracStream::Big { rem, den, r } => {
                let t = &*rem * *r;
                let (digit, rest) = t.div_rem(den);
                *rem = rest;
                digit.to_u32().expect("digit below base")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_conversion_is_exact() {
        for x in [0.0, 0.5, 0.75, 0.1, 1.0 / 3.0, 1e-300, 5e-324, 0.9999999999999999] {
            let p = TorusPoint::from_f64(x).unwrap();
            assert_eq!(p.to_f64(), x);
        }
        assert!(TorusPoint::from_f64(1.0).is_err());
        assert!(TorusPoint::from_f64(-0.1).is_err());
        assert!(TorusPoint::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn parse_forms() {
        assert_eq!("1/3".parse::<TorusPoint>().unwrap(), TorusPoint::from_ratio(1, 3).unwrap());
        assert_eq!("2^-3".parse::<TorusPoint>().unwrap(), TorusPoint::from_ratio(1, 8).unwrap());
        assert_eq!("0.25".parse::<TorusPoint>().unwrap(), TorusPoint::from_ratio(1, 4).unwrap());
        assert!("3/2".parse::<TorusPoint>().is_err());
        assert!("2^3".parse::<TorusPoint>().is_err());
    }

    #[test]
    fn addition_wraps() {
        let a = TorusPoint::from_f64(0.75).unwrap();
        let b = TorusPoint::from_ratio(1, 2).unwrap();
        let (s, w) = a.add_mod1(&b);
        assert!(w);
        assert_eq!(s, TorusPoint::from_ratio(1, 4).unwrap());
        let (s, w) = TorusPoint::from_ratio(1, 3).unwrap().add_mod1(&TorusPoint::from_ratio(1, 9).unwrap());
        assert!(!w);
        assert_eq!(s, TorusPoint::from_ratio(4, 9).unwrap());
    }

    #[test]
    fn big_addition_matches_small() {
        let a = TorusPoint::from_f64(1e-300).unwrap();
        let b = TorusPoint::from_ratio(1, 3).unwrap();
        let (s, w) = a.add_mod1(&b);
        assert!(!w);
        assert!((s.to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn scale_index_exact_at_powers() {
        let r = 3;
        for m in 1..30 {
            let h = TorusPoint::inverse_power(r, m).unwrap();
            assert_eq!(h.scale_index(r), Some(m));
            assert_eq!(h.cmp_inverse_power(r, m), Ordering::Equal);
        }
        assert_eq!(TorusPoint::from_ratio(1, 5).unwrap().scale_index(2), Some(2));
        assert_eq!(TorusPoint::zero().scale_index(2), None);
    }

    #[test]
    fn frac_stream_digits() {
        // 0.75 = 0.11 in base 2
        let mut s = TorusPoint::from_f64(0.75).unwrap().frac_stream(2);
        assert!(s.upper_half());
        assert_eq!(s.advance(), 1);
        assert_eq!(s.value(), 0.5);
        assert_eq!(s.advance(), 1);
        assert_eq!(s.advance(), 0);
        // 1/3 = 0.1000... in base 3
        let mut s = TorusPoint::from_ratio(1, 3).unwrap().frac_stream(3);
        assert_eq!(s.advance(), 1);
        assert_eq!(s.advance(), 0);
        // big representation agrees with small
        let x = 0.3_f64;
        let p = TorusPoint::from_f64(x).unwrap();
        let (n, d) = p.parts();
        let mut big = FracStream::Big { rem: n, den: d, r: 3 };
        let mut small = p.frac_stream(3);
        for _ in 0..200 {
            assert_eq!(big.advance(), small.advance());
            assert_eq!(big.upper_half(), small.upper_half());
        }
    }
}
