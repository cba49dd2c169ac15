//! The exact limit density of `S_n / n`.
//!
//! For each rotation number `p/q` the limit deviation, as `t` sweeps
//! `I_{p/q}`, covers the interval
//!
//! ```text
//! J_{p/q} = [(p - t_{p/q})/q - 1/2, (p - t_{p/q} + 1)/q - 1/2]
//! ```
//!
//! uniformly with density `q/(2^q - 1)`. Summing these over `q <= N` gives the
//! step function `nu_N`, kept here with exact breakpoints and values.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{farey_enumerate, mersenne, t_of, ExactError, Interval, RotationFraction};
use crate::rational::Rational;

/// Largest `N` accepted by [`assemble`] unless a caller supplies its own cap.
pub const DEFAULT_MAX_Q: u32 = 64;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("N = {requested} exceeds the arithmetic capacity limit {limit}")]
    Capacity { requested: u32, limit: u32 },
    #[error("{what} requires q >= {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: u32,
        got: u32,
    },
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One summand `nu_{p/q} = height * 1_{J_{p/q}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityComponent {
    pub r: RotationFraction,
    pub support: Interval,
    pub height: Rational,
}

impl DensityComponent {
    /// `height * |J|`, which equals `|I_{p/q}| = 1/(2^q - 1)`.
    pub fn mass(&self) -> Rational {
        &self.height * &self.support.width()
    }
}

pub fn component(r: RotationFraction) -> DensityComponent {
    let q = Rational::from_integer(r.q());
    let base = (Rational::from_integer(r.p()) - t_of(r)) / &q - Rational::half();
    let hi = &base + &q.recip();
    DensityComponent {
        r,
        support: Interval::new(base, hi),
        height: Rational::new(r.q(), mersenne(r.q())),
    }
}

/// Every component with `q <= n`, in `(q, p)` order.
pub fn components(n: u32) -> Result<Vec<DensityComponent>, DensityError> {
    let fractions = farey_enumerate(n)?;
    Ok(fractions.into_par_iter().map(component).collect())
}

/// A right-continuous, piecewise-constant function with exact breakpoints.
///
/// `values[i]` holds on `[breakpoints[i], breakpoints[i + 1])`; the function
/// is zero left of the first breakpoint and from the last one on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<Rational>,
    values: Vec<Rational>,
}

/// One constant piece of a [`StepFunction`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plateau<'a> {
    pub left: &'a Rational,
    pub right: &'a Rational,
    pub value: &'a Rational,
}

impl Plateau<'_> {
    pub fn midpoint(&self) -> Rational {
        (self.left + self.right) / Rational::from_integer(2)
    }

    pub fn width(&self) -> Rational {
        self.right - self.left
    }

    pub fn mass(&self) -> Rational {
        self.value * &self.width()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauRow {
    pub x_left: Rational,
    pub x_right: Rational,
    pub value_exact: Rational,
    #[serde(serialize_with = "serialize_f64_17")]
    pub value_float: f64,
}

/// Writes a float with 17 significant digits.
pub fn format_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn serialize_f64_17<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    // a JSON number, but with a fixed 17-digit rendering
    let text = format_f64_17(*v);
    let raw = serde_json::value::RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

impl StepFunction {
    /// Builds the sum of indicator functions `height * 1_[lo, hi)` by a sweep
    /// over the merged endpoint list.
    pub fn from_boxes<'a, I>(boxes: I) -> Self
    where
        I: IntoIterator<Item = (&'a Interval, &'a Rational)>,
    {
        let mut events: Vec<(Rational, Rational)> = Vec::new();
        for (interval, height) in boxes {
            events.push((interval.lo.clone(), height.clone()));
            events.push((interval.hi.clone(), -height));
        }
        events.sort_by(|a, b| a.0.cmp(&b.0));

        // coincident endpoints collapse into one breakpoint
        let mut merged: Vec<(Rational, Rational)> = Vec::with_capacity(events.len());
        for (x, delta) in events {
            match merged.last_mut() {
                Some((last_x, acc)) if *last_x == x => *acc += delta,
                _ => merged.push((x, delta)),
            }
        }

        let mut breakpoints = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        let mut running = Rational::zero();
        for (x, delta) in merged {
            if delta.is_zero() {
                continue;
            }
            running += delta;
            breakpoints.push(x);
            values.push(running.clone());
        }
        // the value after the last breakpoint is the (zero) total
        if let Some(last) = values.pop() {
            debug_assert!(last.is_zero());
        }
        StepFunction {
            breakpoints,
            values,
        }
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn plateaus(&self) -> impl Iterator<Item = Plateau<'_>> {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, value)| Plateau {
                left: &w[0],
                right: &w[1],
                value,
            })
    }

    /// Right-continuous evaluation; zero outside the support.
    pub fn evaluate(&self, x: &Rational) -> Rational {
        let idx = self.breakpoints.partition_point(|b| b <= x);
        if idx == 0 || idx >= self.breakpoints.len() {
            Rational::zero()
        } else {
            self.values[idx - 1].clone()
        }
    }

    pub fn evaluate_f64(&self, x: f64) -> f64 {
        match Rational::from_f64(x) {
            Some(x) => self.evaluate(&x).to_f64(),
            None => 0.0,
        }
    }

    /// `∫_{-inf}^{x} f`.
    pub fn cdf(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for p in self.plateaus() {
            if x <= p.left {
                break;
            }
            let right = if x < p.right { x } else { p.right };
            acc += p.value * &(right - p.left);
        }
        acc
    }

    /// [`StepFunction::cdf`] at each of an ascending list of points, in one
    /// pass.
    pub fn cdf_at_sorted(&self, xs: &[Rational]) -> Vec<Rational> {
        debug_assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        let plateaus: Vec<Plateau<'_>> = self.plateaus().collect();
        let mut out = Vec::with_capacity(xs.len());
        let mut done = Rational::zero();
        let mut k = 0;
        for x in xs {
            while k < plateaus.len() && plateaus[k].right <= x {
                done += plateaus[k].mass();
                k += 1;
            }
            let mut acc = done.clone();
            if k < plateaus.len() && plateaus[k].left < x {
                acc += plateaus[k].value * &(x - plateaus[k].left);
            }
            out.push(acc);
        }
        out
    }

    /// `∫_a^b f` for `a <= b`.
    pub fn integrate(&self, a: &Rational, b: &Rational) -> Rational {
        self.cdf(b) - self.cdf(a)
    }

    pub fn total_mass(&self) -> Rational {
        self.plateaus().map(|p| p.mass()).sum()
    }

    /// First moment `∫ x f(x) dx`, exactly.
    pub fn mean(&self) -> Rational {
        let two = Rational::from_integer(2);
        self.plateaus()
            .map(|p| p.value * &((p.right * p.right - p.left * p.left) / &two))
            .sum()
    }

    /// `max_x (self - other)(x)`, attained at a breakpoint of one of them.
    pub fn max_excess_over(&self, other: &StepFunction) -> Rational {
        self.breakpoints
            .iter()
            .chain(&other.breakpoints)
            .map(|x| self.evaluate(x) - other.evaluate(x))
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn rows(&self) -> Vec<PlateauRow> {
        self.plateaus()
            .map(|p| PlateauRow {
                x_left: p.left.clone(),
                x_right: p.right.clone(),
                value_exact: p.value.clone(),
                value_float: p.value.to_f64(),
            })
            .collect()
    }

    /// CSV with header `x_left,x_right,value_exact,value_float`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DensityError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_left", "x_right", "value_exact", "value_float"])?;
        for row in self.rows() {
            w.write_record([
                row.x_left.to_string(),
                row.x_right.to_string(),
                row.value_exact.to_string(),
                format_f64_17(row.value_float),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), DensityError> {
        serde_json::to_writer_pretty(out, &self.rows())?;
        Ok(())
    }
}

/// `nu_n`, the sum of all components with `q <= n`.
pub fn assemble(n: u32) -> Result<StepFunction, DensityError> {
    assemble_capped(n, DEFAULT_MAX_Q)
}

pub fn assemble_capped(n: u32, limit: u32) -> Result<StepFunction, DensityError> {
    if n > limit {
        return Err(DensityError::Capacity {
            requested: n,
            limit,
        });
    }
    if n < 2 {
        return Err(DensityError::TooSmall {
            what: "assemble",
            min: 2,
            got: n,
        });
    }
    let comps = components(n)?;
    Ok(StepFunction::from_boxes(
        comps.iter().map(|c| (&c.support, &c.height)),
    ))
}

/// `4(N + 2)/(2^{N+1} - 1)`, a bound on `sup |nu - nu_N|`.
pub fn error_bound(n: u32) -> Rational {
    Rational::new(BigInt::from(4) * (n + 2), mersenne(n + 1))
}

/// `sum_{q <= n} phi(q)/(2^q - 1)`, the measure of all `I_{p/q}` with `q <= n`.
pub fn total_mass(n: u32) -> Result<Rational, DensityError> {
    Ok(farey_enumerate(n)?
        .into_iter()
        .map(|r| Rational::new(1, mersenne(r.q())))
        .sum())
}

/// Pairs `p1 < p2`, both coprime to `q`, whose supports `J_{p1/q}` and
/// `J_{p2/q}` intersect.
pub fn overlap_pairs(q: u32) -> Result<Vec<(u32, u32)>, DensityError> {
    if q < 3 {
        return Err(DensityError::TooSmall {
            what: "overlap_pairs",
            min: 3,
            got: q,
        });
    }
    let comps: Vec<DensityComponent> = (1..q)
        .filter_map(|p| RotationFraction::new(p, q).ok())
        .map(component)
        .collect();
    let mut pairs = Vec::new();
    for (i, a) in comps.iter().enumerate() {
        for b in &comps[i + 1..] {
            if a.support.intersects(&b.support) {
                pairs.push((a.r.p(), b.r.p()));
            }
        }
    }
    Ok(pairs)
}

/// `sum_{k >= m} k 2^{-k} = (m + 1) 2^{1-m}`.
pub fn weighted_dyadic_tail(m: u32) -> Rational {
    Rational::new(BigInt::from(m + 1) * 2, BigInt::one() << m)
}

/// Exact bracket for `nu(-1/2 + 1/q)`.
///
/// The lower end is `sum_{k=q}^{2q-1} k/(2^k - 1)`. The upper end adds twice
/// the remaining series `sum_{k >= 2q} k/(2^k - 1)`, bounded above by
/// `2^{2q}/(2^{2q} - 1) * (2q + 1) 2^{1-2q}`.
pub fn tail_bounds(q: u32) -> Result<(Rational, Rational), DensityError> {
    if q < 4 {
        return Err(DensityError::TooSmall {
            what: "tail_bounds",
            min: 4,
            got: q,
        });
    }
    let lower: Rational = (q..2 * q).map(|k| Rational::new(k, mersenne(k))).sum();
    let correction = Rational::new(BigInt::one() << (2 * q), mersenne(2 * q));
    let remainder = correction * weighted_dyadic_tail(2 * q);
    let upper = &lower + &(Rational::from_integer(2) * remainder);
    Ok((lower, upper))
}
