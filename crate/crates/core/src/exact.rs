//! Rotation numbers and the exact combinatorics attached to them: the upper
//! itinerary string, the dyadic parameter `t_{p/q}`, the mode-locking
//! interval `I_{p/q}`, and sums of fractional parts along a doubling orbit.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("{p}/{q} is not a reduced fraction with 1 <= p < q")]
    InvalidFraction { p: u32, q: u32 },
    #[error("malformed rotation number {0:?}")]
    Malformed(String),
    #[error("max_q must be at least 2, got {0}")]
    MaxQTooSmall(u32),
    #[error("{t} is not a dyadic rational in [0, 1) with at most {q} binary digits")]
    NotDyadic { t: Rational, q: u32 },
}

/// A reduced fraction `p/q` with `1 <= p < q`, used as a rotation number.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RotationFraction {
    // field order gives the (q, p) enumeration order for the derived Ord
    q: u32,
    p: u32,
}

impl RotationFraction {
    pub fn new(p: u32, q: u32) -> Result<Self, ExactError> {
        if q < 2 || p == 0 || p >= q || p.gcd(&q) != 1 {
            return Err(ExactError::InvalidFraction { p, q });
        }
        Ok(RotationFraction { q, p })
    }

    pub fn p(self) -> u32 {
        self.p
    }

    pub fn q(self) -> u32 {
        self.q
    }

    /// The fraction `(q - p)/q`.
    pub fn mirror(self) -> Self {
        RotationFraction {
            q: self.q,
            p: self.q - self.p,
        }
    }

    pub fn value(self) -> Rational {
        Rational::new(self.p, self.q)
    }
}

impl fmt::Display for RotationFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl fmt::Debug for RotationFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for RotationFraction {
    type Err = ExactError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || ExactError::Malformed(s.to_string());
        let (p, q) = s.trim().split_once('/').ok_or_else(malformed)?;
        let p = p.trim().parse().map_err(|_| malformed())?;
        let q = q.trim().parse().map_err(|_| malformed())?;
        RotationFraction::new(p, q)
    }
}

impl Serialize for RotationFraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RotationFraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All reduced `p/q` with `2 <= q <= max_q`, ordered by `(q, p)`.
pub fn farey_enumerate(max_q: u32) -> Result<Vec<RotationFraction>, ExactError> {
    if max_q < 2 {
        return Err(ExactError::MaxQTooSmall(max_q));
    }
    Ok((2..=max_q)
        .flat_map(|q| {
            (1..q)
                .filter(move |p| p.gcd(&q) == 1)
                .map(move |p| RotationFraction { q, p })
        })
        .collect())
}

/// Euler's totient, by trial division.
pub fn totient(n: u32) -> u32 {
    let mut n = n;
    let mut result = n;
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            while n.is_multiple_of(d) {
                n /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// A finite binary word, indexed from 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The `i`-th bit, `1 <= i <= len`.
    pub fn bit(&self, i: usize) -> bool {
        assert!(
            i >= 1 && i <= self.bits.len(),
            "bit index {i} out of 1..={}",
            self.bits.len()
        );
        self.bits[i - 1]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// The dyadic rational `0.b_1 b_2 ... b_len` in base two.
    pub fn to_dyadic(&self) -> Rational {
        let mut numer = BigInt::from(0);
        for &b in &self.bits {
            numer <<= 1;
            if b {
                numer += 1;
            }
        }
        Rational::dyadic(numer, self.bits.len() as u32)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

/// The upper itinerary `s_i = floor((i+1)p/q) - floor(ip/q)` for `i = 1..=q`.
pub fn upper_string(r: RotationFraction) -> BitString {
    let (p, q) = (u64::from(r.p), u64::from(r.q));
    let bits = (1..=q)
        .map(|i| ((i + 1) * p) / q - (i * p) / q == 1)
        .collect();
    BitString { bits }
}

/// `t_{p/q}`: the dyadic rational whose binary digits are the upper string.
pub fn t_of(r: RotationFraction) -> Rational {
    upper_string(r).to_dyadic()
}

/// A closed interval with exact endpoints.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interior(&self, x: &Rational) -> bool {
        &self.lo < x && x < &self.hi
    }

    /// Closed intervals meet, touching endpoints included.
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(2)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// `2^q - 1` as an exact integer.
pub(crate) fn mersenne(q: u32) -> BigInt {
    (BigInt::one() << q) - 1
}

/// The mode-locking interval
/// `[(2^q t_{p/q} - 1)/(2^q - 1), 2^q t_{p/q}/(2^q - 1)]`.
pub fn interval_i(r: RotationFraction) -> Interval {
    let scaled = t_of(r).shl(r.q);
    debug_assert!(scaled.is_integer());
    let m = Rational::from_integer(mersenne(r.q));
    let hi = &scaled / &m;
    let lo = (scaled - Rational::one()) / m;
    Interval { lo, hi }
}

/// `sum_{i=0}^{q-1} {2^i t}` for a dyadic `t` in `[0, 1)` with at most `q`
/// binary digits, computed as (number of one bits) - t.
pub fn sum_frac_parts(t: &Rational, q: u32) -> Result<Rational, ExactError> {
    let digits = binary_digits(t, q)?;
    let ones = digits.iter().filter(|&&d| d).count();
    Ok(Rational::from_integer(ones as i64) - t)
}

/// `sum_{i=0}^{q-1} floor(2^i t)`, the companion of [`sum_frac_parts`]:
/// `2^q t - (number of one bits)`.
pub fn sum_floor_parts(t: &Rational, q: u32) -> Result<Rational, ExactError> {
    let digits = binary_digits(t, q)?;
    let ones = digits.iter().filter(|&&d| d).count();
    Ok(t.shl(q) - Rational::from_integer(ones as i64))
}

fn binary_digits(t: &Rational, q: u32) -> Result<Vec<bool>, ExactError> {
    let not_dyadic = || ExactError::NotDyadic { t: t.clone(), q };
    if t.is_negative() || *t >= 1 {
        return Err(not_dyadic());
    }
    let scaled = t.shl(q);
    if !scaled.is_integer() {
        return Err(not_dyadic());
    }
    let n = scaled.numer();
    Ok((0..q).rev().map(|k| n.bit(u64::from(k))).collect())
}
