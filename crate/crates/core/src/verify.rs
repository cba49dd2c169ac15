//! Named invariant suites. Each suite runs its checks exhaustively or on a
//! fixed-seed random sample and reports every violation it finds.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::{assemble, component, error_bound, overlap_pairs, tail_bounds, total_mass};
use crate::dynamics::{limit_deviation, FlatSpotMap};
use crate::exact::{
    farey_enumerate, interval_i, sum_floor_parts, sum_frac_parts, t_of, upper_string, Interval,
    RotationFraction,
};
use crate::rational::Rational;

/// The rows of the published table for `q <= 5`:
/// `(p, q, upper string, t, I, J)` with the rationals as literals.
pub type TableLiteral = (
    u32,
    u32,
    &'static str,
    &'static str,
    [&'static str; 2],
    [&'static str; 2],
);

pub const REFERENCE_TABLE: [TableLiteral; 9] = [
    (1, 2, "10", "1/2", ["1/3", "2/3"], ["-1/4", "1/4"]),
    (1, 3, "010", "1/4", ["1/7", "2/7"], ["-1/4", "1/12"]),
    (2, 3, "110", "3/4", ["5/7", "6/7"], ["-1/12", "1/4"]),
    (1, 4, "0010", "1/8", ["1/15", "2/15"], ["-9/32", "-1/32"]),
    (3, 4, "1110", "7/8", ["13/15", "14/15"], ["1/32", "9/32"]),
    (1, 5, "00010", "1/16", ["1/31", "2/31"], ["-25/80", "-9/80"]),
    (2, 5, "01010", "5/16", ["9/31", "10/31"], ["-13/80", "3/80"]),
    (
        3,
        5,
        "10110",
        "11/16",
        ["21/31", "22/31"],
        ["-3/80", "13/80"],
    ),
    (
        4,
        5,
        "11110",
        "15/16",
        ["29/31", "30/31"],
        ["9/80", "25/80"],
    ),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Table,
    Strings,
    Mirror,
    FracSums,
    Endpoints,
    Piecewise,
    Convergence,
    Mass,
    Overlap,
    Refinement,
    Tail,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Table,
        Suite::Strings,
        Suite::Mirror,
        Suite::FracSums,
        Suite::Endpoints,
        Suite::Piecewise,
        Suite::Convergence,
        Suite::Mass,
        Suite::Overlap,
        Suite::Refinement,
        Suite::Tail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Table => "table",
            Suite::Strings => "strings",
            Suite::Mirror => "mirror",
            Suite::FracSums => "frac-sums",
            Suite::Endpoints => "endpoints",
            Suite::Piecewise => "piecewise",
            Suite::Convergence => "convergence",
            Suite::Mass => "mass",
            Suite::Overlap => "overlap",
            Suite::Refinement => "refinement",
            Suite::Tail => "tail",
        }
    }

    pub fn run(self) -> SuiteReport {
        let mut report = SuiteReport::new(self.name());
        match self {
            Suite::Table => table(&mut report),
            Suite::Strings => strings(&mut report),
            Suite::Mirror => mirror(&mut report),
            Suite::FracSums => frac_sums(&mut report),
            Suite::Endpoints => endpoints(&mut report),
            Suite::Piecewise => piecewise(&mut report, 12, 10),
            Suite::Convergence => convergence(&mut report, 8, 20, &[1_000, 10_000]),
            Suite::Mass => mass(&mut report),
            Suite::Overlap => overlap(&mut report, 25),
            Suite::Refinement => refinement(&mut report),
            Suite::Tail => tail(&mut report),
        }
        report
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!(
                    "unknown suite {s:?}; expected one of {} or all",
                    names.join(", ")
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: u64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            suite: name.to_string(),
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(describe());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn rf(p: u32, q: u32) -> RotationFraction {
    RotationFraction::new(p, q).expect("reduced fraction")
}

fn parse(s: &str) -> Rational {
    s.parse().expect("rational literal")
}

fn table(report: &mut SuiteReport) {
    let fractions = farey_enumerate(5).expect("max_q >= 2");
    report.check(fractions.len() == REFERENCE_TABLE.len(), || {
        format!("{} fractions with q <= 5, expected 9", fractions.len())
    });
    for (r, &(p, q, s, t, i, j)) in fractions.iter().zip(REFERENCE_TABLE.iter()) {
        report.check(*r == rf(p, q), || {
            format!("row order: got {r}, expected {p}/{q}")
        });
        let string = upper_string(*r).to_string();
        report.check(string == s, || format!("{r}: s+ = {string}, expected {s}"));
        let tv = t_of(*r);
        report.check(tv == parse(t), || format!("{r}: t = {tv}, expected {t}"));
        let iv = interval_i(*r);
        let expected_i = Interval::new(parse(i[0]), parse(i[1]));
        report.check(iv == expected_i, || {
            format!("{r}: I = {iv}, expected {expected_i}")
        });
        let jv = component(*r).support;
        let expected_j = Interval::new(parse(j[0]), parse(j[1]));
        report.check(jv == expected_j, || {
            format!("{r}: J = {jv}, expected {expected_j}")
        });
    }
}

fn strings(report: &mut SuiteReport) {
    let fractions = farey_enumerate(30).expect("max_q >= 2");
    let mut intervals = Vec::with_capacity(fractions.len());
    for &r in &fractions {
        let s = upper_string(r);
        report.check(
            s.count_ones() == r.p() as usize && !s.bit(r.q() as usize),
            || format!("{r}: s+ = {s} violates the ones/last-bit invariant"),
        );
        let iv = interval_i(r);
        let width = Rational::new(1, crate::exact::mersenne(r.q()));
        report.check(iv.width() == width, || format!("{r}: |I| = {}", iv.width()));
        intervals.push((iv, r));
    }
    intervals.sort_by(|a, b| a.0.lo.cmp(&b.0.lo));
    for w in intervals.windows(2) {
        report.check(w[0].0.hi <= w[1].0.lo, || {
            format!(
                "I_{} = {} and I_{} = {} overlap",
                w[0].1, w[0].0, w[1].1, w[1].0
            )
        });
    }
}

fn mirror(report: &mut SuiteReport) {
    for r in farey_enumerate(30).expect("max_q >= 2") {
        let lhs = t_of(r.mirror());
        let rhs = Rational::one() - t_of(r);
        report.check(lhs == rhs, || {
            format!("t_{} = {lhs}, 1 - t_{r} = {rhs}", r.mirror())
        });
    }
}

fn frac_sums(report: &mut SuiteReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    for _ in 0..1000 {
        let q: u32 = rng.gen_range(1..=60);
        let numer: u64 = rng.gen_range(0..(1u64 << q));
        let t = Rational::dyadic(numer, q);
        let direct: Rational = (0..q).map(|i| t.shl(i).fract()).sum();
        let floors: Rational = (0..q)
            .map(|i| Rational::from_integer(t.shl(i).floor()))
            .sum();
        let closed = sum_frac_parts(&t, q);
        let closed_floor = sum_floor_parts(&t, q);
        report.check(closed.as_ref() == Ok(&direct), || {
            format!("t = {t}, q = {q}: closed form {closed:?}, direct {direct}")
        });
        report.check(closed_floor.as_ref() == Ok(&floors), || {
            format!("t = {t}, q = {q}: floor closed form {closed_floor:?}, direct {floors}")
        });
    }
}

fn endpoints(report: &mut SuiteReport) {
    for r in farey_enumerate(20).expect("max_q >= 2") {
        let iv = interval_i(r);
        let left = limit_deviation(r, &iv.lo);
        let right = limit_deviation(r, &iv.hi);
        report.check(left.is_ok() && left == right, || {
            format!("{r}: limit at t- = {left:?}, at t+ = {right:?}")
        });
    }
}

/// Slope `(2^q - 1)/q` on both halves of `I_{p/q}` and a jump of `-1/q`
/// when crossing `t_{p/q}` from below.
pub(crate) fn piecewise(report: &mut SuiteReport, max_q: u32, points: i64) {
    for r in farey_enumerate(max_q).expect("max_q >= 2") {
        let iv = interval_i(r);
        let tp = t_of(r);
        let slope = Rational::new(crate::exact::mersenne(r.q()), r.q());
        let at_tp = limit_deviation(r, &tp).expect("t_p/q lies in I_p/q");
        let at_lo = limit_deviation(r, &iv.lo).expect("endpoint");
        report.check(at_tp == component(r).support.lo, || {
            format!("{r}: value at t_p/q {at_tp} is not the left end of J")
        });
        // right half [t_{p/q}, t+], anchored at t_{p/q}
        for k in 1..=points {
            let t = &tp + &((&iv.hi - &tp) * Rational::new(k, points));
            let v = limit_deviation(r, &t).expect("in interval");
            let expected = &at_tp + &(&slope * &(&t - &tp));
            report.check(v == expected, || {
                format!("{r}: right half at t = {t}: {v} != {expected}")
            });
        }
        // left half [t-, t_{p/q}), anchored at t-
        for k in 0..points {
            let t = &iv.lo + &((&tp - &iv.lo) * Rational::new(k, points));
            let v = limit_deviation(r, &t).expect("in interval");
            let expected = &at_lo + &(&slope * &(&t - &iv.lo));
            report.check(v == expected, || {
                format!("{r}: left half at t = {t}: {v} != {expected}")
            });
        }
        // left limit at t_{p/q} minus the right value is the jump size 1/q
        let left_limit = &at_lo + &(&slope * &(&tp - &iv.lo));
        let jump = &at_tp - &left_limit;
        report.check(jump == Rational::new(-1, r.q()), || {
            format!("{r}: jump {jump}")
        });
    }
}

/// A random rational strictly inside `interval`.
pub(crate) fn random_interior<R: Rng>(rng: &mut R, interval: &Interval) -> Rational {
    let d: i64 = rng.gen_range(2..=4096);
    let k: i64 = rng.gen_range(1..d);
    &interval.lo + &(interval.width() * Rational::new(k, d))
}

/// A random rational in `[0, 1)` with denominator up to 10^4.
pub(crate) fn random_unit<R: Rng>(rng: &mut R) -> Rational {
    let d: i64 = rng.gen_range(1..=10_000);
    Rational::new(rng.gen_range(0..d), d)
}

/// `|S_n/n - limit| <= (l + 2q)/n` along exact orbits.
pub(crate) fn convergence(report: &mut SuiteReport, max_q: u32, per_interval: usize, ns: &[u64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_2022);
    for r in farey_enumerate(max_q).expect("max_q >= 2") {
        let iv = interval_i(r);
        for _ in 0..per_interval {
            let t = random_interior(&mut rng, &iv);
            let x0 = random_unit(&mut rng);
            let map = FlatSpotMap::new(t.clone()).expect("t in (0,1)");
            let limit = limit_deviation(r, &t).expect("interior");
            let entry = map.entry_time(&x0, 10 << r.q()).expect("x0 in [0,1)");
            let Some(ell) = entry else {
                report.check(false, || format!("{r}: t = {t}, x0 = {x0}: no entry"));
                continue;
            };
            for &n in ns {
                let s = map.deviation_sum_fast(&x0, n, 10 << r.q()).expect("n > 0");
                let gap = (s / Rational::from_integer(n) - &limit).abs();
                let bound = Rational::new(BigInt::from(ell + 2 * u64::from(r.q())), n);
                report.check(gap <= bound, || {
                    format!("{r}: t = {t}, x0 = {x0}, n = {n}: |S_n/n - limit| = {gap} > {bound}")
                });
            }
        }
    }
}

fn mass(report: &mut SuiteReport) {
    for r in farey_enumerate(25).expect("max_q >= 2") {
        let m = component(r).mass();
        let expected = Rational::new(1, crate::exact::mersenne(r.q()));
        report.check(m == expected, || format!("{r}: mass {m}"));
    }
    let mut previous = Rational::zero();
    for n in 2..=40 {
        let m = total_mass(n).expect("n >= 2");
        report.check(m > previous && m < Rational::one(), || {
            format!("total_mass({n}) = {m}")
        });
        previous = m;
    }
}

pub(crate) fn overlap(report: &mut SuiteReport, max_q: u32) {
    for q in 3..=max_q {
        let found = overlap_pairs(q).expect("q >= 3");
        let coprime: Vec<u32> = (1..q)
            .filter(|p| RotationFraction::new(*p, q).is_ok())
            .collect();
        for (i, &p1) in coprime.iter().enumerate() {
            for &p2 in &coprime[i + 1..] {
                let listed = found.contains(&(p1, p2));
                report.check(listed == (p2 == p1 + 1), || {
                    format!("q = {q}: pair ({p1}, {p2}) overlap = {listed}")
                });
            }
        }
    }
}

fn refinement(report: &mut SuiteReport) {
    let nus: Vec<_> = (2..=25).map(|n| assemble(n).expect("n in range")).collect();
    let nu = |n: u32| &nus[(n - 2) as usize];
    for n in 2..20 {
        let (lo, hi) = (nu(n), nu(n + 1));
        let excess = lo.max_excess_over(hi);
        report.check(excess <= Rational::zero(), || {
            format!("nu_{n} exceeds nu_{} by {excess}", n + 1)
        });
    }
    for n in 5..=15 {
        let gap = nu(n + 5).max_excess_over(nu(n));
        let bound = error_bound(n);
        report.check(gap <= bound, || {
            format!("nu_{} - nu_{n} = {gap} > {bound}", n + 5)
        });
    }
    for n in 2..=20 {
        let f = nu(n);
        report.check(f.mean().is_zero(), || {
            format!("mean of nu_{n} is {}", f.mean())
        });
        for p in f.plateaus() {
            let m = p.midpoint();
            let mirrored = f.evaluate(&-&m);
            report.check(*p.value == mirrored, || {
                format!("nu_{n}({m}) = {} but nu_{n}({}) = {mirrored}", p.value, -&m)
            });
        }
    }
    // at most two supports with the same q cover any point
    for q in 3..=25 {
        let comps: Vec<_> = (1..q)
            .filter_map(|p| RotationFraction::new(p, q).ok())
            .map(component)
            .collect();
        let boxes: Vec<Rational> = comps.iter().map(|_| Rational::one()).collect();
        let cover = crate::density::StepFunction::from_boxes(
            comps.iter().map(|c| &c.support).zip(boxes.iter()),
        );
        let most = cover
            .values()
            .iter()
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero);
        report.check(most <= Rational::from_integer(2), || {
            format!("q = {q}: {most} supports overlap")
        });
    }
}

fn tail(report: &mut SuiteReport) {
    let nu = assemble(50).expect("50 <= default cap");
    for q in 8..=16 {
        let (lower, upper) = tail_bounds(q).expect("q >= 4");
        let v = nu.evaluate(&(Rational::new(1, q) - Rational::half()));
        report.check(lower <= v && v <= upper, || {
            format!("q = {q}: nu_50 = {v} outside [{lower}, {upper}]")
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for suite in [
            Suite::Table,
            Suite::Strings,
            Suite::Mirror,
            Suite::FracSums,
            Suite::Endpoints,
            Suite::Mass,
            Suite::Overlap,
            Suite::Tail,
        ] {
            let report = suite.run();
            assert!(report.passed(), "{suite}: {:?}", report.failures);
            assert!(report.checks > 0);
        }
    }

    #[test]
    fn small_piecewise_and_convergence() {
        let mut report = SuiteReport::new("piecewise");
        piecewise(&mut report, 6, 5);
        assert!(report.passed(), "{:?}", report.failures);
        let mut report = SuiteReport::new("convergence");
        convergence(&mut report, 4, 3, &[200]);
        assert!(report.passed(), "{:?}", report.failures);
    }

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
