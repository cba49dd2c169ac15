//! Monte Carlo sampling of `S_n(t, x0)/n` with `(t, x0)` uniform on the unit
//! square, and comparison of the resulting histogram with an exact `nu_N`.
//!
//! Draws are multiples of `2^-53`, the same grid a uniform `f64` in `[0, 1)`
//! lives on. Orbits are iterated on integer grid indices: doubling modulo one
//! and the flat-spot test are exact there, and the deviation sum is an exact
//! integer, so the closed-form fast path and plain iteration agree bit for bit.
//!
//! Sample `i` draws from ChaCha8 with key `seed` and stream `i`, which makes a
//! run independent of how samples are spread over threads.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{format_f64_17, serialize_f64_17, StepFunction};
use crate::rational::Rational;

pub const GRID_BITS: u32 = 53;
const ONE: u64 = 1 << GRID_BITS;
const HALF: i128 = 1 << (GRID_BITS - 1);
const GRID_SCALE: f64 = ONE as f64;

pub const DEFAULT_ENTRY_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A point of `[0, 1)` stored as `k * 2^-53`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint(u64);

impl GridPoint {
    pub fn new(k: u64) -> Option<Self> {
        (k < ONE).then_some(GridPoint(k))
    }

    /// Exact conversion; `None` unless `x` is in `[0, 1)` and a multiple of
    /// `2^-53`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !(0.0..1.0).contains(&x) {
            return None;
        }
        let scaled = x * GRID_SCALE;
        (scaled.fract() == 0.0).then_some(GridPoint(scaled as u64))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        GridPoint(rng.next_u64() >> (64 - GRID_BITS))
    }

    pub fn index(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / GRID_SCALE
    }

    pub fn to_rational(self) -> Rational {
        Rational::dyadic(self.0, GRID_BITS)
    }
}

/// The flat-spot map restricted to the `2^-53` grid.
#[derive(Clone, Copy, Debug)]
struct GridMap {
    t: u64,
}

impl GridMap {
    #[inline]
    fn in_flat_spot(self, x: u64) -> bool {
        let d = 2 * x;
        d <= self.t || d >= ONE + self.t
    }

    #[inline]
    fn step(self, x: u64) -> u64 {
        if self.in_flat_spot(x) {
            self.t
        } else {
            (2 * x) & (ONE - 1)
        }
    }
}

/// `(x - 1/2)` in units of `2^-53`.
#[inline]
fn deviation(x: u64) -> i128 {
    i128::from(x) - HALF
}

/// One realized `S_n/n` and where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub t: f64,
    pub x0: f64,
    pub n: u64,
    /// `S_n` in units of `2^-53`, exact.
    pub sum: i128,
    pub value: f64,
    pub entry_time: Option<u64>,
    pub period: Option<u64>,
}

impl DeviationSample {
    pub fn exact_value(&self) -> Rational {
        Rational::new(self.sum, num_bigint::BigInt::from(self.n) << GRID_BITS)
    }
}

fn scaled_value(sum: i128, n: u64) -> f64 {
    sum as f64 / GRID_SCALE / n as f64
}

/// `S_n` by iterating all `n` steps.
pub fn direct_sum(t: GridPoint, x0: GridPoint, n: u64) -> i128 {
    let map = GridMap { t: t.0 };
    let mut x = x0.0;
    let mut sum = 0i128;
    for _ in 0..n {
        sum += deviation(x);
        x = map.step(x);
    }
    sum
}

/// `S_n` by iterating until the orbit lands on the flat spot, then adding
/// whole periods of the orbit of `t` in closed form. Falls back to plain
/// iteration whenever `cap` is exceeded.
pub fn sample_at(t: GridPoint, x0: GridPoint, n: u64, cap: u64) -> DeviationSample {
    let map = GridMap { t: t.0 };
    let mut sum = 0i128;
    let mut x = x0.0;
    let mut taken = 0u64;
    let mut entry_time = None;
    while taken < n {
        sum += deviation(x);
        taken += 1;
        if map.in_flat_spot(x) {
            entry_time = Some(taken - 1);
            break;
        }
        if taken > cap {
            break;
        }
        x = map.step(x);
    }

    let mut period = None;
    if entry_time.is_some() && taken < n {
        let remaining = n - taken;
        match periodic_block(map, cap) {
            Some(prefix) => {
                let p = (prefix.len() - 1) as u64;
                period = Some(p);
                let full = i128::from(remaining / p);
                sum += full * prefix[p as usize] + prefix[(remaining % p) as usize];
            }
            None => {
                let mut y = map.t;
                for _ in 0..remaining {
                    sum += deviation(y);
                    y = map.step(y);
                }
            }
        }
    } else if taken < n {
        // cap exceeded before reaching the flat spot
        x = map.step(x);
        for _ in taken..n {
            sum += deviation(x);
            x = map.step(x);
        }
    }

    DeviationSample {
        t: t.to_f64(),
        x0: x0.to_f64(),
        n,
        sum,
        value: scaled_value(sum, n),
        entry_time,
        period,
    }
}

/// Prefix sums of deviations along one period of the orbit of `t`;
/// `prefix[k]` is the sum of the first `k` terms and the last entry is the
/// full period.
fn periodic_block(map: GridMap, cap: u64) -> Option<Vec<i128>> {
    let mut prefix = vec![0i128];
    let mut y = map.t;
    loop {
        let next = prefix[prefix.len() - 1] + deviation(y);
        prefix.push(next);
        if map.in_flat_spot(y) {
            return Some(prefix);
        }
        if prefix.len() as u64 > cap {
            return None;
        }
        y = map.step(y);
    }
}

/// Draws `(t, x0)` and evaluates `S_n/n` by the fast path.
pub fn sample_one<R: RngCore + ?Sized>(rng: &mut R, n: u64, cap: u64) -> DeviationSample {
    let t = GridPoint::random(rng);
    let x0 = GridPoint::random(rng);
    sample_at(t, x0, n, cap)
}

/// The generator for sample `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub samples: u64,
    pub iterations: u64,
    pub entry_cap: u64,
    pub bins: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.samples == 0 {
            return Err(MonteCarloError::Config("samples must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(MonteCarloError::Config(
                "iterations must be positive".into(),
            ));
        }
        if self.entry_cap == 0 {
            return Err(MonteCarloError::Config("entry cap must be positive".into()));
        }
        if self.bins < 2 {
            return Err(MonteCarloError::Config(format!(
                "need at least 2 bins, got {}",
                self.bins
            )));
        }
        Ok(())
    }
}

/// Counts over `B` equal bins partitioning `[-1/2, 1/2]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
}

impl Histogram {
    pub fn new(bins: usize) -> Self {
        Histogram {
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Bin edges `-1/2 + i/B`, exactly.
    pub fn edges(&self) -> Vec<Rational> {
        let b = self.bins() as i64;
        (0..=b).map(|i| Rational::new(2 * i - b, 2 * b)).collect()
    }

    /// Adds the exact value `sum / (2^53 n)`; `1/2` itself goes in the last bin.
    pub fn add_exact(&mut self, sum: i128, n: u64) {
        let denom = i128::from(n) << GRID_BITS;
        let shifted = sum + denom / 2;
        if shifted < 0 {
            self.underflow += 1;
        } else if shifted > denom {
            self.overflow += 1;
        } else {
            let b = self.bins() as i128;
            let idx = ((shifted * b) / denom).min(b - 1);
            self.counts[idx as usize] += 1;
        }
    }

    pub fn add_value(&mut self, v: f64) {
        if v < -0.5 {
            self.underflow += 1;
        } else if v > 0.5 {
            self.overflow += 1;
        } else {
            let b = self.bins();
            let idx = (((v + 0.5) * b as f64) as usize).min(b - 1);
            self.counts[idx] += 1;
        }
    }

    pub fn merge(mut self, other: &Histogram) -> Histogram {
        assert_eq!(self.bins(), other.bins());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self
    }

    /// CSV with header `bin_left,bin_right,count,empirical_density,exact_density`.
    pub fn write_csv<W: Write>(&self, nu: &StepFunction, out: W) -> Result<(), MonteCarloError> {
        let edges = self.edges();
        let cdf = nu.cdf_at_sorted(&edges);
        let total = self.total() as f64;
        let width = 1.0 / self.bins() as f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "bin_left",
            "bin_right",
            "count",
            "empirical_density",
            "exact_density",
        ])?;
        for (i, &count) in self.counts.iter().enumerate() {
            let exact_mass = (&cdf[i + 1] - &cdf[i]).to_f64();
            w.write_record([
                edges[i].to_string(),
                edges[i + 1].to_string(),
                count.to_string(),
                format_f64_17(count as f64 / total / width),
                format_f64_17(exact_mass / width),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of `S_n/n` over `config.samples` draws, on the current rayon pool.
pub fn run(config: &SimulationConfig) -> Result<Histogram, MonteCarloError> {
    config.validate()?;
    let bins = config.bins;
    Ok((0..config.samples)
        .into_par_iter()
        .fold(
            || Histogram::new(bins),
            |mut h, i| {
                let s = sample_one(
                    &mut substream(config.seed, i),
                    config.iterations,
                    config.entry_cap,
                );
                h.add_exact(s.sum, s.n);
                h
            },
        )
        .reduce(|| Histogram::new(bins), |a, b| a.merge(&b)))
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(
    config: &SimulationConfig,
    threads: usize,
) -> Result<Histogram, MonteCarloError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    pool.install(|| run(config))
}

/// The individual samples of a run, in index order.
pub fn collect_samples(config: &SimulationConfig) -> Result<Vec<DeviationSample>, MonteCarloError> {
    config.validate()?;
    Ok((0..config.samples)
        .into_par_iter()
        .map(|i| {
            sample_one(
                &mut substream(config.seed, i),
                config.iterations,
                config.entry_cap,
            )
        })
        .collect())
}

/// Distances between a histogram and the exact bin masses of `nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `sum_bins |count/M - exact mass|`, plus any mass outside `[-1/2, 1/2]`.
    #[serde(rename = "L1", serialize_with = "serialize_f64_17")]
    pub l1: f64,
    /// `max_edges |empirical CDF - exact CDF|`.
    #[serde(rename = "KS", serialize_with = "serialize_f64_17")]
    pub ks: f64,
}

pub fn compare(h: &Histogram, nu: &StepFunction) -> Comparison {
    let edges = h.edges();
    let cdf: Vec<f64> = nu
        .cdf_at_sorted(&edges)
        .iter()
        .map(Rational::to_f64)
        .collect();
    let total = h.total() as f64;
    let mut l1 = (h.underflow + h.overflow) as f64 / total;
    let mut emp = h.underflow as f64 / total;
    let mut ks = (emp - cdf[0]).abs();
    for (i, &count) in h.counts.iter().enumerate() {
        let mass = count as f64 / total;
        l1 += (mass - (cdf[i + 1] - cdf[i])).abs();
        emp += mass;
        ks = ks.max((emp - cdf[i + 1]).abs());
    }
    Comparison { l1, ks }
}

/// `max_edges |CDF_a - CDF_b|` between two histograms on the same bins.
pub fn ks_between(a: &Histogram, b: &Histogram) -> f64 {
    assert_eq!(a.bins(), b.bins());
    let (ta, tb) = (a.total() as f64, b.total() as f64);
    let (mut ca, mut cb) = (a.underflow as f64 / ta, b.underflow as f64 / tb);
    let mut ks = (ca - cb).abs();
    for (x, y) in a.counts.iter().zip(&b.counts) {
        ca += *x as f64 / ta;
        cb += *y as f64 / tb;
        ks = ks.max((ca - cb).abs());
    }
    ks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    #[serde(flatten)]
    pub comparison: Comparison,
    #[serde(rename = "M")]
    pub samples: u64,
    pub n: u64,
    #[serde(rename = "B")]
    pub bins: usize,
    pub seed: u64,
}

/// Inverse-CDF sampler for a nonnegative step function, normalized to a
/// probability distribution.
#[derive(Clone, Debug)]
pub struct InverseCdf {
    lefts: Vec<f64>,
    widths: Vec<f64>,
    cumulative: Vec<f64>,
}

impl InverseCdf {
    pub fn new(f: &StepFunction) -> Self {
        let mut lefts = Vec::new();
        let mut widths = Vec::new();
        let mut masses = Vec::new();
        for p in f.plateaus() {
            lefts.push(p.left.to_f64());
            widths.push(p.width().to_f64());
            masses.push(p.mass());
        }
        let total: Rational = masses.iter().sum();
        let mut running = Rational::zero();
        let mut cumulative = Vec::with_capacity(masses.len());
        for m in &masses {
            running += m;
            cumulative.push((&running / &total).to_f64());
        }
        InverseCdf {
            lefts,
            widths,
            cumulative,
        }
    }

    /// The quantile at `u` in `[0, 1)`, linear inside each plateau.
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let lo = if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        };
        let span = self.cumulative[idx] - lo;
        let frac = if span > 0.0 {
            ((u - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.lefts[idx] + frac * self.widths[idx]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UniformScheme {
    /// Independent uniforms.
    Iid,
    /// One uniform inside each of `M` equal strata of `[0, 1)`.
    Stratified,
}

/// Histogram of `samples` draws from `nu` itself.
pub fn sample_step_function(
    nu: &StepFunction,
    samples: u64,
    bins: usize,
    seed: u64,
    scheme: UniformScheme,
) -> Histogram {
    let sampler = InverseCdf::new(nu);
    (0..samples)
        .into_par_iter()
        .fold(
            || Histogram::new(bins),
            |mut h, i| {
                let v: f64 = substream(seed, i).gen();
                let u = match scheme {
                    UniformScheme::Iid => v,
                    UniformScheme::Stratified => (i as f64 + v) / samples as f64,
                };
                h.add_value(sampler.quantile(u));
                h
            },
        )
        .reduce(|| Histogram::new(bins), |a, b| a.merge(&b))
}
