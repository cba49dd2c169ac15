//! The flat-spot map
//!
//! ```text
//! f_t(x) = t            for x in [0, t/2] or x in [(1+t)/2, 1)
//! f_t(x) = 2x mod 1     otherwise
//! ```
//!
//! iterated either in exact rational arithmetic or in binary floating point.
//! Doubling modulo one is exact in base two, so both backends follow the same
//! orbit as long as the float inputs are the same numbers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use thiserror::Error;

use crate::exact::{farey_enumerate, interval_i, ExactError, RotationFraction};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("map parameter {0} is outside [0, 1)")]
    ParameterOutOfRange(String),
    #[error("point {0} is outside [0, 1)")]
    PointOutOfRange(String),
    #[error("iteration count must be positive")]
    ZeroIterations,
    #[error("t = {t} is not in I_{r} = {interval}")]
    NotInInterval {
        t: Rational,
        r: RotationFraction,
        interval: String,
    },
    #[error("t = {t} is not in the interior of I_{r} = {interval}")]
    NotInInterior {
        t: Rational,
        r: RotationFraction,
        interval: String,
    },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Number types the map can be iterated over.
pub trait CirclePoint: Clone + PartialEq + std::fmt::Display {
    fn zero() -> Self;
    fn in_unit_interval(&self) -> bool;
    /// `2x mod 1` for `x` in `[0, 1)`.
    fn double_mod_one(&self) -> Self;
    /// Membership of `self` in `[0, t/2] ∪ [(1+t)/2, 1)`.
    fn in_flat_spot(&self, t: &Self) -> bool;
    /// `acc + (self - 1/2)`.
    fn accumulate_deviation(&self, acc: &mut Self);

    /// `sum_{i<n} (f_t^i(x0) - 1/2)` by direct iteration, `n >= 1`.
    fn orbit_deviation_sum(t: &Self, x0: &Self, n: u64) -> Self {
        let mut acc = Self::zero();
        let mut x = x0.clone();
        for i in 0..n {
            x.accumulate_deviation(&mut acc);
            if i + 1 < n {
                x = if x.in_flat_spot(t) {
                    t.clone()
                } else {
                    x.double_mod_one()
                };
            }
        }
        acc
    }
}

impl CirclePoint for f64 {
    fn zero() -> Self {
        0.0
    }

    fn in_unit_interval(&self) -> bool {
        (0.0..1.0).contains(self)
    }

    fn double_mod_one(&self) -> Self {
        let d = 2.0 * self;
        if d >= 1.0 {
            d - 1.0
        } else {
            d
        }
    }

    fn in_flat_spot(&self, t: &Self) -> bool {
        // 2x - 1 is exact for 2x in [1, 2); forming 1 + t would round.
        let d = 2.0 * self;
        d <= *t || (d >= 1.0 && d - 1.0 >= *t)
    }

    fn accumulate_deviation(&self, acc: &mut Self) {
        *acc += self - 0.5;
    }
}

impl CirclePoint for Rational {
    fn zero() -> Self {
        Rational::zero()
    }

    fn in_unit_interval(&self) -> bool {
        !self.is_negative() && *self < 1
    }

    fn double_mod_one(&self) -> Self {
        let d = self.shl(1);
        if d >= 1 {
            d - Rational::one()
        } else {
            d
        }
    }

    fn in_flat_spot(&self, t: &Self) -> bool {
        let d = self.shl(1);
        d <= *t || d - Rational::one() >= *t
    }

    fn accumulate_deviation(&self, acc: &mut Self) {
        *acc += self;
        *acc -= &Rational::half();
    }

    // Same loop on integer numerators over the common denominator of t and
    // x0, which doubling never enlarges.
    fn orbit_deviation_sum(t: &Self, x0: &Self, n: u64) -> Self {
        let d = t.denom().lcm(x0.denom());
        let big_t = (t * &Rational::from_integer(d.clone())).numer().clone();
        let mut k = (x0 * &Rational::from_integer(d.clone())).numer().clone();
        let mut sum = BigInt::zero();
        for i in 0..n {
            sum += &k;
            if i + 1 < n {
                let k2: BigInt = &k << 1u32;
                k = if k2 <= big_t || &k2 - &d >= big_t {
                    big_t.clone()
                } else if k2 >= d {
                    k2 - &d
                } else {
                    k2
                };
            }
        }
        Rational::new(sum, d) - Rational::new(n, 2u32)
    }
}

/// `f_t` for a fixed truncation height `t` in `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatSpotMap<T> {
    t: T,
}

impl<T: CirclePoint> FlatSpotMap<T> {
    pub fn new(t: T) -> Result<Self, DynamicsError> {
        if !t.in_unit_interval() {
            return Err(DynamicsError::ParameterOutOfRange(t.to_string()));
        }
        Ok(FlatSpotMap { t })
    }

    pub fn t(&self) -> &T {
        &self.t
    }

    pub fn in_flat_spot(&self, x: &T) -> bool {
        x.in_flat_spot(&self.t)
    }

    pub fn step(&self, x: &T) -> Result<T, DynamicsError> {
        check_point(x)?;
        Ok(self.step_unchecked(x))
    }

    fn step_unchecked(&self, x: &T) -> T {
        if x.in_flat_spot(&self.t) {
            self.t.clone()
        } else {
            x.double_mod_one()
        }
    }

    /// The first `n` points of the orbit of `x0`, starting with `x0` itself.
    pub fn orbit(&self, x0: &T, n: usize) -> Result<Vec<T>, DynamicsError> {
        check_point(x0)?;
        let mut out = Vec::with_capacity(n);
        let mut x = x0.clone();
        for _ in 0..n {
            let next = self.step_unchecked(&x);
            out.push(x);
            x = next;
        }
        Ok(out)
    }

    /// `S_n = sum_{i<n} (f^i(x0) - 1/2)`.
    pub fn deviation_sum(&self, x0: &T, n: u64) -> Result<T, DynamicsError> {
        check_point(x0)?;
        if n == 0 {
            return Err(DynamicsError::ZeroIterations);
        }
        Ok(T::orbit_deviation_sum(&self.t, x0, n))
    }

    /// Smallest `i <= cap` with `f^i(x0)` in the flat spot, so that
    /// `f^{i+1}(x0) = t`. `None` when the orbit stays outside up to `cap`
    /// (for instance on the unstable periodic orbit).
    pub fn entry_time(&self, x0: &T, cap: u64) -> Result<Option<u64>, DynamicsError> {
        check_point(x0)?;
        let mut x = x0.clone();
        for i in 0..=cap {
            if x.in_flat_spot(&self.t) {
                return Ok(Some(i));
            }
            x = x.double_mod_one();
        }
        Ok(None)
    }

    /// Period of the orbit of `t` itself, i.e. the least `k >= 1` with
    /// `f^k(t) = t`, searched up to `cap`.
    pub fn return_time(&self, cap: u64) -> Option<u64> {
        let mut x = self.t.clone();
        for k in 1..=cap {
            x = self.step_unchecked(&x);
            if x == self.t {
                return Some(k);
            }
        }
        None
    }

    /// Entry time, period and `S_n` of one orbit.
    pub fn summarize(&self, x0: &T, n: u64, cap: u64) -> Result<OrbitSummary<T>, DynamicsError> {
        let entry_time = self.entry_time(x0, cap)?;
        let period = entry_time.and_then(|_| self.return_time(cap));
        let partial_sum = self.deviation_sum(x0, n)?;
        Ok(OrbitSummary {
            entry_time,
            period,
            partial_sum,
            n,
        })
    }
}

impl FlatSpotMap<Rational> {
    /// `S_n` computed by summing up to the entry into the flat spot and one
    /// period of the orbit of `t`, then multiplying out the full periods.
    /// Falls back to direct iteration when entry or return exceed `cap`.
    pub fn deviation_sum_fast(
        &self,
        x0: &Rational,
        n: u64,
        cap: u64,
    ) -> Result<Rational, DynamicsError> {
        if n == 0 {
            return Err(DynamicsError::ZeroIterations);
        }
        let (Some(entry), Some(period)) = (self.entry_time(x0, cap)?, self.return_time(cap)) else {
            return self.deviation_sum(x0, n);
        };
        let head = entry + 1;
        if n <= head + period {
            return self.deviation_sum(x0, n);
        }
        let mut sum = self.deviation_sum(x0, head)?;
        let mut prefix = Vec::with_capacity(period as usize + 1);
        let mut acc = Rational::zero();
        let mut x = self.t.clone();
        prefix.push(acc.clone());
        for _ in 0..period {
            x.accumulate_deviation(&mut acc);
            prefix.push(acc.clone());
            x = self.step_unchecked(&x);
        }
        let rest = n - head;
        sum += &prefix[period as usize] * &Rational::from_integer(rest / period);
        sum += &prefix[(rest % period) as usize];
        Ok(sum)
    }
}

fn check_point<T: CirclePoint>(x: &T) -> Result<(), DynamicsError> {
    if x.in_unit_interval() {
        Ok(())
    } else {
        Err(DynamicsError::PointOutOfRange(x.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSummary<T> {
    pub entry_time: Option<u64>,
    pub period: Option<u64>,
    pub partial_sum: T,
    pub n: u64,
}

/// The attracting orbit `(t, {2t}, ..., {2^{q-1} t})` for `t` strictly
/// inside `I_{p/q}`.
pub fn stable_orbit(r: RotationFraction, t: &Rational) -> Result<Vec<Rational>, DynamicsError> {
    let interval = interval_i(r);
    if !interval.contains_interior(t) {
        return Err(DynamicsError::NotInInterior {
            t: t.clone(),
            r,
            interval: interval.to_string(),
        });
    }
    Ok(doubling_orbit(t, r.q()))
}

fn doubling_orbit(t: &Rational, len: u32) -> Vec<Rational> {
    (0..len).map(|i| t.shl(i).fract()).collect()
}

/// The almost-sure limit of `S_n / n` for `t` in `I_{p/q}`:
/// `(1/q) sum_{i<q} ({2^i t} - 1/2)`.
///
/// At the discontinuity `t = t_{p/q}` this takes the value approached from
/// the right, because `{2^{q-1} t_{p/q}}` is `0` there.
pub fn limit_deviation(r: RotationFraction, t: &Rational) -> Result<Rational, DynamicsError> {
    let interval = interval_i(r);
    if !interval.contains(t) {
        return Err(DynamicsError::NotInInterval {
            t: t.clone(),
            r,
            interval: interval.to_string(),
        });
    }
    let q = Rational::from_integer(r.q());
    let sum: Rational = doubling_orbit(t, r.q()).into_iter().sum();
    Ok(sum / &q - Rational::half())
}

/// The `p/q` with `q <= max_q` whose interval contains `t`, by a linear scan
/// in `(q, p)` order.
pub fn locate(t: &Rational, max_q: u32) -> Result<Option<RotationFraction>, DynamicsError> {
    Ok(farey_enumerate(max_q)?
        .into_iter()
        .find(|&r| interval_i(r).contains(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn rf(p: u32, q: u32) -> RotationFraction {
        RotationFraction::new(p, q).unwrap()
    }

    fn exact_map(t: Rational) -> FlatSpotMap<Rational> {
        FlatSpotMap::new(t).unwrap()
    }

    #[test]
    fn fast_sum_matches_direct_iteration() {
        for (t, x0) in [
            (rat(5, 16), rat(1, 3)),
            (rat(3, 7), rat(2, 9)),
            (rat(1, 2), rat(1, 3)),
            (rat(11, 16), rat(0, 1)),
        ] {
            let map = exact_map(t);
            for n in [1, 2, 5, 17, 64, 301] {
                assert_eq!(
                    map.deviation_sum_fast(&x0, n, 1000).unwrap(),
                    map.deviation_sum(&x0, n).unwrap(),
                    "t = {}, x0 = {x0}, n = {n}",
                    map.t()
                );
            }
        }
    }

    #[test]
    fn step_examples() {
        assert_eq!(exact_map(rat(1, 2)).step(&rat(1, 2)).unwrap(), rat(0, 1));
        assert_eq!(exact_map(rat(1, 3)).step(&rat(9, 10)).unwrap(), rat(1, 3));
        for t in [rat(1, 5), rat(2, 3), rat(7, 16)] {
            let m = exact_map(t.clone());
            assert_eq!(m.step(&(&t / &rat(2, 1))).unwrap(), t);
        }
    }

    #[test]
    fn right_flat_spot_boundary_agrees_with_doubling() {
        let t = rat(3, 7);
        let m = exact_map(t.clone());
        let x = (Rational::one() + &t) / rat(2, 1);
        assert_eq!(m.step(&x).unwrap(), t);
        assert_eq!(x.double_mod_one(), t);
    }

    #[test]
    fn step_rejects_points_outside_unit_interval() {
        let m = exact_map(rat(1, 2));
        assert!(matches!(
            m.step(&rat(1, 1)),
            Err(DynamicsError::PointOutOfRange(_))
        ));
        assert!(m.step(&rat(-1, 4)).is_err());
        assert!(FlatSpotMap::new(rat(1, 1)).is_err());
        assert!(FlatSpotMap::new(-0.1f64).is_err());
    }

    #[test]
    fn deviation_sum_examples() {
        let m = exact_map(rat(1, 2));
        assert_eq!(m.deviation_sum(&rat(1, 2), 2).unwrap(), rat(-1, 2));
        assert_eq!(m.deviation_sum(&rat(1, 2), 4).unwrap(), rat(-1, 1));
        let m = exact_map(rat(3, 11));
        assert_eq!(m.deviation_sum(&rat(5, 9), 1).unwrap(), rat(1, 18));
        assert_eq!(
            m.deviation_sum(&rat(5, 9), 0),
            Err(DynamicsError::ZeroIterations)
        );
    }

    #[test]
    fn entry_time_examples() {
        assert_eq!(
            exact_map(rat(1, 2)).entry_time(&rat(1, 2), 100).unwrap(),
            Some(1)
        );
        assert_eq!(
            exact_map(rat(1, 3)).entry_time(&rat(9, 10), 100).unwrap(),
            Some(0)
        );
        assert_eq!(
            exact_map(rat(1, 2)).entry_time(&rat(1, 3), 100).unwrap(),
            None
        );
    }

    #[test]
    fn stable_orbit_examples() {
        assert_eq!(
            stable_orbit(rf(1, 2), &rat(2, 5)).unwrap(),
            vec![rat(2, 5), rat(4, 5)]
        );
        assert_eq!(
            stable_orbit(rf(1, 3), &rat(3, 14)).unwrap(),
            vec![rat(3, 14), rat(3, 7), rat(6, 7)]
        );
        assert_eq!(
            stable_orbit(rf(2, 3), &rat(11, 14)).unwrap(),
            vec![rat(11, 14), rat(4, 7), rat(1, 7)]
        );
        for (r, t) in [
            (rf(1, 2), rat(2, 5)),
            (rf(1, 3), rat(3, 14)),
            (rf(2, 3), rat(11, 14)),
        ] {
            let orbit = stable_orbit(r, &t).unwrap();
            let m = exact_map(t.clone());
            assert_eq!(m.step(orbit.last().unwrap()).unwrap(), t);
        }
    }

    #[test]
    fn stable_orbit_rejects_boundary_and_outside() {
        assert!(stable_orbit(rf(1, 2), &rat(1, 3)).is_err());
        assert!(stable_orbit(rf(1, 2), &rat(1, 10)).is_err());
    }

    #[test]
    fn limit_deviation_examples() {
        assert_eq!(limit_deviation(rf(1, 2), &rat(2, 3)).unwrap(), rat(0, 1));
        assert_eq!(limit_deviation(rf(1, 2), &rat(1, 3)).unwrap(), rat(0, 1));
        assert_eq!(limit_deviation(rf(1, 2), &rat(1, 2)).unwrap(), rat(-1, 4));
        assert_eq!(
            limit_deviation(rf(2, 5), &rat(5, 16)).unwrap(),
            rat(-13, 80)
        );
        assert!(matches!(
            limit_deviation(rf(1, 2), &rat(1, 4)),
            Err(DynamicsError::NotInInterval { .. })
        ));
    }

    #[test]
    fn locate_examples() {
        assert_eq!(locate(&rat(1, 2), 5).unwrap(), Some(rf(1, 2)));
        assert_eq!(locate(&rat(3, 10), 5).unwrap(), Some(rf(2, 5)));
        assert_eq!(locate(&rat(1, 10), 3).unwrap(), None);
        assert!(locate(&rat(1, 10), 1).is_err());
    }

    #[test]
    fn float_and_exact_orbits_coincide() {
        let t = 0.3017578125f64;
        let x0 = 0.7431640625f64;
        let fm = FlatSpotMap::new(t).unwrap();
        let em = exact_map(Rational::from_f64(t).unwrap());
        let fo = fm.orbit(&x0, 200).unwrap();
        let eo = em.orbit(&Rational::from_f64(x0).unwrap(), 200).unwrap();
        for (a, b) in fo.iter().zip(&eo) {
            assert_eq!(Rational::from_f64(*a).unwrap(), *b);
        }
    }

    #[test]
    fn float_flat_spot_test_matches_exact_near_right_edge() {
        // 1 + t is not representable for this t, so a naive test would round
        let t = 0.1f64;
        let te = Rational::from_f64(t).unwrap();
        let edge = ((Rational::one() + &te) / rat(2, 1)).to_f64();
        let mut x = f64::from_bits(edge.to_bits() - 8);
        for _ in 0..16 {
            let xe = Rational::from_f64(x).unwrap();
            assert_eq!(x.in_flat_spot(&t), xe.in_flat_spot(&te), "x = {x:e}");
            x = f64::from_bits(x.to_bits() + 1);
        }
    }

    #[test]
    fn return_time_of_stable_orbit() {
        let m = exact_map(rat(3, 14));
        assert_eq!(m.return_time(100), Some(3));
        let s = m.summarize(&rat(1, 2), 10, 100).unwrap();
        assert_eq!(s.period, Some(3));
        assert_eq!(s.entry_time, Some(1));
    }
}
