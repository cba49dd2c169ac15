//! Exact rational numbers.
//!
//! [`Rational`] is a thin newtype over [`BigRational`] that fixes the
//! textual form used everywhere in this crate: `"num/den"` in lowest terms,
//! or just `"num"` when the denominator is one.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, ParseBigIntError};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
}

impl From<ParseBigIntError> for ParseRationalError {
    fn from(e: ParseBigIntError) -> Self {
        ParseRationalError::Malformed(e.to_string())
    }
}

/// An arbitrary-precision fraction, always kept in lowest terms with a
/// positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new<N: Into<BigInt>, D: Into<BigInt>>(numer: N, denom: D) -> Self {
        // BigRational::new reduces and normalizes the sign; it panics on 0.
        Rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_integer<N: Into<BigInt>>(n: N) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn half() -> Self {
        Rational::new(1, 2)
    }

    /// `2^-k`.
    pub fn dyadic(numer: impl Into<BigInt>, k: u32) -> Self {
        Rational::new(numer, BigInt::one() << k)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Largest integer not exceeding `self`.
    pub fn floor(&self) -> BigInt {
        self.numer().div_floor(self.denom())
    }

    /// `self - floor(self)`, always in `[0, 1)`.
    pub fn fract(&self) -> Self {
        let r = self.numer().mod_floor(self.denom());
        Rational::new(r, self.denom().clone())
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    pub fn pow(&self, exp: i32) -> Self {
        Rational(num_traits::Pow::pow(&self.0, exp))
    }

    /// Multiplies by `2^k` without going through a general product.
    pub fn shl(&self, k: u32) -> Self {
        Rational::new(self.numer() << k, self.denom().clone())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// The exact rational value of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Rational)
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `"a/b"`, integers, and finite decimals such as `"-0.375"`
/// (converted exactly).
impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse()?;
            let d: BigInt = d.trim().parse()?;
            if d.is_zero() {
                return Err(ParseRationalError::ZeroDenominator(s.to_string()));
            }
            return Ok(Rational::new(n, d));
        }
        if let Some((int, frac)) = s.split_once('.') {
            let negative = int.starts_with('-');
            let digits = int.trim_start_matches(['-', '+']);
            if frac.is_empty() && digits.is_empty()
                || !frac.chars().all(|c| c.is_ascii_digit())
                || !digits.chars().all(|c| c.is_ascii_digit())
            {
                return Err(ParseRationalError::Malformed(s.to_string()));
            }
            let joined = format!("{digits}{frac}");
            let magnitude: BigInt = if joined.is_empty() {
                BigInt::zero()
            } else {
                joined.parse()?
            };
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let value = Rational::new(magnitude, scale);
            return Ok(if negative { -value } else { value });
        }
        Ok(Rational::from_integer(s.parse::<BigInt>()?))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.0.is_integer() && *self.numer() == BigInt::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.0.cmp(&BigRational::from_integer(BigInt::from(*other))))
    }
}

/// Shorthand for building a [`Rational`] from small integers.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(numer, denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_uses_lowest_terms() {
        assert_eq!(rat(10, 32).to_string(), "5/16");
        assert_eq!(rat(13, -80).to_string(), "-13/80");
        assert_eq!(rat(6, 3).to_string(), "2");
        assert_eq!(rat(0, 7).to_string(), "0");
    }

    #[test]
    fn parse_fraction_decimal_and_integer() {
        assert_eq!("3/10".parse::<Rational>().unwrap(), rat(3, 10));
        assert_eq!("0.3".parse::<Rational>().unwrap(), rat(3, 10));
        assert_eq!("-0.375".parse::<Rational>().unwrap(), rat(-3, 8));
        assert_eq!(".5".parse::<Rational>().unwrap(), rat(1, 2));
        assert_eq!("-4".parse::<Rational>().unwrap(), rat(-4, 1));
        assert_eq!(" 6/-4 ".parse::<Rational>().unwrap(), rat(-3, 2));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert_eq!("".parse::<Rational>(), Err(ParseRationalError::Empty));
        assert!(matches!(
            "1/0".parse::<Rational>(),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
        assert!("1.2.3".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!(".".parse::<Rational>().is_err());
    }

    #[test]
    fn floor_and_fract_of_negatives() {
        let x = rat(-13, 80);
        assert_eq!(x.floor(), BigInt::from(-1));
        assert_eq!(x.fract(), rat(67, 80));
        assert_eq!(rat(4, 3).fract(), rat(1, 3));
        assert_eq!(rat(2, 1).fract(), Rational::zero());
    }

    #[test]
    fn serde_round_trip_as_string() {
        let v = vec![rat(5, 16), rat(-13, 80), rat(3, 1)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["5/16","-13/80","3"]"#);
        let back: Vec<Rational> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn from_f64_is_exact() {
        assert_eq!(Rational::from_f64(0.375).unwrap(), rat(3, 8));
        assert_eq!(Rational::from_f64(0.1).unwrap().to_f64(), 0.1);
        assert!(Rational::from_f64(f64::NAN).is_none());
    }

    #[test]
    fn shl_doubles() {
        assert_eq!(rat(5, 16).shl(3), rat(5, 2));
    }
}
