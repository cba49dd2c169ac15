//! Tsallis Q-exponentials and Q-Gaussian densities, and their comparison
//! with the exact limit density.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{error_bound, StepFunction};
use crate::rational::Rational;

/// Below this distance from 1, `Q` is treated as exactly 1.
const Q_ONE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QGaussianError {
    #[error("1 + (1 - Q) x = {base} is not positive (Q = {q}, x = {x})")]
    Domain { q: f64, x: f64, base: f64 },
    #[error("q_log needs y > 0, got {0}")]
    LogDomain(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("truncation error {error:e} is not negligible against nu = {value:e} at z = 1/{q}")]
    TruncationNotNegligible { q: u32, value: f64, error: f64 },
    #[error("fit needs at least 3 samples above the floor, found {0}")]
    TooFewSamples(usize),
    #[error(
        "fit did not converge after {iterations} iterations (spread {spread:e}, best {best:?})"
    )]
    NotConverged {
        iterations: usize,
        spread: f64,
        best: Vec<f64>,
    },
}

fn is_one(q: f64) -> bool {
    (q - 1.0).abs() < Q_ONE_TOLERANCE
}

/// `e_Q(x) = (1 + (1 - Q) x)^{1/(1 - Q)}`; errors where the base is not
/// positive.
pub fn q_exp(q: f64, x: f64) -> Result<f64, QGaussianError> {
    if is_one(q) {
        return Ok(x.exp());
    }
    let scaled = (1.0 - q) * x;
    let base = 1.0 + scaled;
    if base <= 0.0 {
        return Err(QGaussianError::Domain { q, x, base });
    }
    Ok((scaled.ln_1p() / (1.0 - q)).exp())
}

/// [`q_exp`] with the compact-support cutoff: zero where `Q < 1` and the
/// base is not positive.
pub fn q_exp_cutoff(q: f64, x: f64) -> f64 {
    match q_exp(q, x) {
        Ok(v) => v,
        Err(_) if q < 1.0 => 0.0,
        Err(_) => f64::INFINITY,
    }
}

/// `ln_Q(y) = (y^{1-Q} - 1)/(1 - Q)`, the inverse of [`q_exp`].
pub fn q_log(q: f64, y: f64) -> Result<f64, QGaussianError> {
    if y.is_nan() || y <= 0.0 {
        return Err(QGaussianError::LogDomain(y));
    }
    if is_one(q) {
        return Ok(y.ln());
    }
    let a = 1.0 - q;
    Ok((a * y.ln()).exp_m1() / a)
}

/// Parameters of `C e_Q(-beta (y - y0)^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QGaussianParams {
    #[serde(rename = "Q")]
    pub q: f64,
    pub beta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub y0: f64,
}

impl QGaussianParams {
    pub fn new(q: f64, beta: f64, c: f64, y0: f64) -> Result<Self, QGaussianError> {
        if !q.is_finite() || q <= 0.0 {
            return Err(QGaussianError::InvalidParams(format!(
                "Q = {q} must be positive"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(QGaussianError::InvalidParams(format!(
                "beta = {beta} must be positive"
            )));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(QGaussianError::InvalidParams(format!(
                "C = {c} must be positive"
            )));
        }
        if !y0.is_finite() {
            return Err(QGaussianError::InvalidParams(format!(
                "y0 = {y0} must be finite"
            )));
        }
        Ok(QGaussianParams { q, beta, c, y0 })
    }

    /// `1/(1 - Q)`, the power in `e_Q`.
    pub fn exponent(&self) -> f64 {
        1.0 / (1.0 - self.q)
    }

    /// Half-width `((1 - Q) beta)^{-1/2}` of the support; `None` for `Q >= 1`.
    pub fn support_halfwidth(&self) -> Option<f64> {
        (self.q < 1.0 && !is_one(self.q)).then(|| ((1.0 - self.q) * self.beta).sqrt().recip())
    }

    pub fn density(&self, y: f64) -> f64 {
        let d = y - self.y0;
        self.c * q_exp_cutoff(self.q, -self.beta * d * d)
    }

    /// Leading term `K z^{1/(1-Q)}` of the density at distance `z` inside the
    /// left end of the support, with `K = C (2/l)^{1/(1-Q)}`.
    pub fn tail_leading(&self, z: f64) -> Result<f64, QGaussianError> {
        let ell = self.require_compact()?;
        let m = self.exponent();
        Ok(self.c * (2.0 / ell).powf(m) * z.powf(m))
    }

    /// Density at `y0 - l + z`.
    pub fn density_from_left_end(&self, z: f64) -> Result<f64, QGaussianError> {
        let ell = self.require_compact()?;
        Ok(self.density(self.y0 - ell + z))
    }

    fn require_compact(&self) -> Result<f64, QGaussianError> {
        self.support_halfwidth().ok_or_else(|| {
            QGaussianError::InvalidParams(format!("Q = {} has unbounded support", self.q))
        })
    }
}

/// One probe of the tail comparison at `z = 1/q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailProbe {
    pub q: u32,
    pub z: f64,
    pub qgaussian: f64,
    pub nu_exact: Rational,
    pub nu: f64,
    pub ratio: f64,
}

/// Truncation error must stay below this fraction of the probed value.
pub const TAIL_TRUNCATION_TOLERANCE: f64 = 1e-6;

/// `density(-l + 1/q) / nu_N(-1/2 + 1/q)` over a range of `q`, where `nu`
/// was assembled with denominators up to `n`.
pub fn tail_ratio_series(
    params: &QGaussianParams,
    nu: &StepFunction,
    n: u32,
    qs: RangeInclusive<u32>,
) -> Result<Vec<TailProbe>, QGaussianError> {
    let error = error_bound(n).to_f64();
    let mut out = Vec::new();
    for q in qs {
        if q == 0 {
            return Err(QGaussianError::InvalidParams("q must be positive".into()));
        }
        let z = 1.0 / f64::from(q);
        let x = Rational::new(1, q) - Rational::half();
        let nu_exact = nu.evaluate(&x);
        let value = nu_exact.to_f64();
        if error.is_nan() || error > TAIL_TRUNCATION_TOLERANCE * value {
            return Err(QGaussianError::TruncationNotNegligible { q, value, error });
        }
        let qgaussian = params.density_from_left_end(z)?;
        out.push(TailProbe {
            q,
            z,
            qgaussian,
            nu_exact,
            nu: value,
            ratio: qgaussian / value,
        });
    }
    Ok(out)
}

/// Settings for [`fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    /// Plateaus whose value is below this are left out.
    pub floor: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            floor: 1e-4,
            max_iterations: 5000,
            tolerance: 1e-13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "Q")]
    pub q: f64,
    pub beta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub y0: f64,
    /// Sum of squared log residuals at the optimum.
    pub discrepancy: f64,
    pub samples: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn params(&self) -> QGaussianParams {
        QGaussianParams {
            q: self.q,
            beta: self.beta,
            c: self.c,
            y0: self.y0,
        }
    }
}

/// Fits `C e_Q(-beta y^2)` (center fixed at 0) to a step function.
///
/// Samples are the plateau midpoints whose value is at least
/// `options.floor`. The discrepancy is the sum of squared differences of the
/// logarithms, so a candidate whose support misses a sample is infeasible.
/// For fixed `(Q, beta)` the best `ln C` is the mean residual, which leaves a
/// two-parameter search: a coarse grid, then a Nelder-Mead polish.
pub fn fit(nu: &StepFunction, options: &FitOptions) -> Result<FitResult, QGaussianError> {
    let mut xs = Vec::new();
    let mut log_values = Vec::new();
    for p in nu.plateaus() {
        let v = p.value.to_f64();
        if v >= options.floor && v > 0.0 {
            xs.push(p.midpoint().to_f64());
            log_values.push(v.ln());
        }
    }
    fit_log_samples(&xs, &log_values, options)
}

/// [`fit`] on raw samples `(x_i, ln v_i)`.
pub fn fit_log_samples(
    xs: &[f64],
    log_values: &[f64],
    options: &FitOptions,
) -> Result<FitResult, QGaussianError> {
    assert_eq!(xs.len(), log_values.len());
    if xs.len() < 3 {
        return Err(QGaussianError::TooFewSamples(xs.len()));
    }
    let objective = LogObjective { xs, log_values };

    // coarse grid over Q in (0, 1) and log(beta)
    let mut best = (f64::INFINITY, [0.5, 1.0]);
    for i in 1..40 {
        let q = f64::from(i) / 40.0;
        for j in 0..=60 {
            let log_beta = f64::from(j) / 60.0 * 6.0;
            let value = objective.evaluate(q, log_beta).0;
            if value < best.0 {
                best = (value, [q, log_beta]);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(QGaussianError::NotConverged {
            iterations: 0,
            spread: f64::INFINITY,
            best: best.1.to_vec(),
        });
    }

    let start = best.1;
    let simplex = [
        start,
        [start[0] + 0.02, start[1]],
        [start[0], start[1] + 0.05],
    ];
    let outcome = nelder_mead(
        |v: [f64; 2]| objective.evaluate(v[0], v[1]).0,
        simplex,
        options.max_iterations,
        options.tolerance,
    );
    if !outcome.converged {
        return Err(QGaussianError::NotConverged {
            iterations: outcome.iterations,
            spread: outcome.spread,
            best: outcome.point.to_vec(),
        });
    }
    let [q, log_beta] = outcome.point;
    let (discrepancy, log_c) = objective.evaluate(q, log_beta);
    Ok(FitResult {
        q,
        beta: log_beta.exp(),
        c: log_c.exp(),
        y0: 0.0,
        discrepancy,
        samples: xs.len(),
        iterations: outcome.iterations,
    })
}

struct LogObjective<'a> {
    xs: &'a [f64],
    log_values: &'a [f64],
}

impl LogObjective<'_> {
    /// `(sum of squared residuals, optimal ln C)` at `(Q, ln beta)`.
    fn evaluate(&self, q: f64, log_beta: f64) -> (f64, f64) {
        if !(q > 0.0 && q < 1.0) || !log_beta.is_finite() {
            return (f64::INFINITY, 0.0);
        }
        let a = (1.0 - q) * log_beta.exp();
        let m = 1.0 / (1.0 - q);
        let mut shape = Vec::with_capacity(self.xs.len());
        for &x in self.xs {
            let base = 1.0 - a * x * x;
            if base <= 0.0 {
                return (f64::INFINITY, 0.0);
            }
            shape.push(m * base.ln());
        }
        let n = shape.len() as f64;
        let log_c = self
            .log_values
            .iter()
            .zip(&shape)
            .map(|(v, s)| v - s)
            .sum::<f64>()
            / n;
        let sse = self
            .log_values
            .iter()
            .zip(&shape)
            .map(|(v, s)| {
                let r = log_c + s - v;
                r * r
            })
            .sum();
        (sse, log_c)
    }
}

#[derive(Debug)]
struct SimplexOutcome<const D: usize> {
    point: [f64; D],
    iterations: usize,
    spread: f64,
    converged: bool,
}

/// Plain Nelder-Mead with the standard coefficients; stops when the spread
/// of objective values across the simplex drops below `tolerance`.
fn nelder_mead<const D: usize, F>(
    f: F,
    initial: [[f64; D]; 3],
    max_iterations: usize,
    tolerance: f64,
) -> SimplexOutcome<D>
where
    F: Fn([f64; D]) -> f64,
{
    debug_assert_eq!(D + 1, 3);
    let mut simplex: Vec<([f64; D], f64)> = initial.iter().map(|&p| (p, f(p))).collect();
    let combine = |a: &[f64; D], b: &[f64; D], w: f64| {
        let mut out = [0.0; D];
        for k in 0..D {
            out[k] = a[k] + w * (b[k] - a[k]);
        }
        out
    };

    for iteration in 0..max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[D].1 - simplex[0].1;
        if spread.is_finite() && spread.abs() <= tolerance * (1.0 + simplex[0].1.abs()) {
            return SimplexOutcome {
                point: simplex[0].0,
                iterations: iteration,
                spread,
                converged: true,
            };
        }
        let mut centroid = [0.0; D];
        for (p, _) in &simplex[..D] {
            for k in 0..D {
                centroid[k] += p[k] / D as f64;
            }
        }
        let worst = simplex[D];
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = f(reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = f(expanded);
            simplex[D] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[D - 1].1 {
            simplex[D] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                combine(&centroid, &reflected, 0.5)
            } else {
                combine(&centroid, &worst.0, 0.5)
            };
            let fc = f(contracted);
            if fc < worst.1.min(fr) {
                simplex[D] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let p = combine(&best, &entry.0, 0.5);
                    *entry = (p, f(p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexOutcome {
        point: simplex[0].0,
        iterations: max_iterations,
        spread: simplex[D].1 - simplex[0].1,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Interval;

    fn reference_params() -> QGaussianParams {
        QGaussianParams::new(0.7, 16.1, 1.0, 0.0).unwrap()
    }

    #[test]
    fn q_exp_examples() {
        assert!((q_exp(2.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        for q in [0.3, 0.7, 1.0, 2.0, 5.0] {
            assert_eq!(q_exp(q, 0.0).unwrap(), 1.0);
        }
        for q in [1.0 - 1e-6, 1.0 + 1e-6] {
            assert!((q_exp(q, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-5);
        }
    }

    #[test]
    fn q_exp_domain() {
        assert!(matches!(
            q_exp(0.5, -3.0),
            Err(QGaussianError::Domain { .. })
        ));
        assert_eq!(q_exp_cutoff(0.5, -3.0), 0.0);
        assert!(q_exp(2.0, 1.0).is_err());
        assert!(q_log(0.5, 0.0).is_err());
        assert!(q_log(0.5, -1.0).is_err());
    }

    #[test]
    fn q_log_inverts_q_exp() {
        for q in [0.3, 0.7, 2.0] {
            for i in -100..=100 {
                let x = f64::from(i) / 10.0;
                if let Ok(y) = q_exp(q, x) {
                    let back = q_log(q, y).unwrap();
                    assert!(
                        (back - x).abs() <= 1e-12 * (1.0 + x.abs()),
                        "Q={q} x={x} back={back}"
                    );
                }
            }
        }
    }

    #[test]
    fn density_examples() {
        let p = reference_params();
        assert_eq!(p.density(0.0), 1.0);
        let ell = p.support_halfwidth().unwrap();
        assert!((ell - 0.45502).abs() < 1e-5);
        assert_eq!(p.density(ell + 1e-9), 0.0);
        assert_eq!(p.density(-ell - 0.1), 0.0);
        assert!(p.density(ell - 1e-3) > 0.0);
        assert!(QGaussianParams::new(2.0, 1.0, 1.0, 0.0)
            .unwrap()
            .support_halfwidth()
            .is_none());
    }

    #[test]
    fn tail_exponents() {
        let half = QGaussianParams::new(0.5, 4.0, 1.0, 0.0).unwrap();
        assert_eq!(half.exponent(), 2.0);
        assert!((reference_params().exponent() - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tail_leading_term_is_asymptotic() {
        let p = reference_params();
        let mut last = f64::INFINITY;
        for z in [1e-3, 1e-4, 1e-5] {
            let ratio = p.density_from_left_end(z).unwrap() / p.tail_leading(z).unwrap();
            let gap = (ratio - 1.0).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 5e-3);
    }

    #[test]
    fn log_log_slope_matches_exponent() {
        for q in [0.3, 0.5, 0.7, 0.9] {
            let p = QGaussianParams::new(q, 16.1, 1.0, 0.0).unwrap();
            let (z1, z2) = (1e-6, 1e-4);
            let slope = (p.density_from_left_end(z2).unwrap().ln()
                - p.density_from_left_end(z1).unwrap().ln())
                / (z2.ln() - z1.ln());
            assert!(
                (slope / p.exponent() - 1.0).abs() < 0.01,
                "Q={q} slope={slope}"
            );
        }
    }

    #[test]
    fn params_are_validated() {
        assert!(QGaussianParams::new(0.7, -1.0, 1.0, 0.0).is_err());
        assert!(QGaussianParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(QGaussianParams::new(0.7, 1.0, 0.0, 0.0).is_err());
        assert!(QGaussianParams::new(0.7, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn fit_recovers_a_sampled_q_gaussian() {
        let truth = reference_params();
        let ell = truth.support_halfwidth().unwrap();
        // plateaus of width 1/1000 strictly inside the support
        let cells = (ell * 1000.0).floor() as i64;
        let boxes: Vec<(Interval, Rational)> = (-cells..cells)
            .map(|k| {
                let lo = Rational::new(k, 1000);
                let hi = Rational::new(k + 1, 1000);
                let mid = (k as f64 + 0.5) / 1000.0;
                (
                    Interval::new(lo, hi),
                    Rational::from_f64(truth.density(mid)).unwrap(),
                )
            })
            .collect();
        let step = StepFunction::from_boxes(boxes.iter().map(|(i, h)| (i, h)));
        let fitted = fit(&step, &FitOptions::default()).unwrap();
        assert!((fitted.q / truth.q - 1.0).abs() < 0.01, "{fitted:?}");
        assert!((fitted.beta / truth.beta - 1.0).abs() < 0.01, "{fitted:?}");
        assert!((fitted.c / truth.c - 1.0).abs() < 0.01, "{fitted:?}");
    }

    #[test]
    fn fit_needs_samples() {
        let err = fit_log_samples(&[0.0, 0.1], &[0.0, 0.0], &FitOptions::default()).unwrap_err();
        assert_eq!(err, QGaussianError::TooFewSamples(2));
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let out = nelder_mead(
            |v: [f64; 2]| (v[0] - 0.3).powi(2) + 2.0 * (v[1] + 1.2).powi(2),
            [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]],
            2000,
            1e-16,
        );
        assert!(out.converged);
        assert!((out.point[0] - 0.3).abs() < 1e-6);
        assert!((out.point[1] + 1.2).abs() < 1e-6);
    }

    #[test]
    fn fit_result_json_field_names() {
        let r = FitResult {
            q: 0.7,
            beta: 16.1,
            c: 2.5,
            y0: 0.0,
            discrepancy: 1.0,
            samples: 10,
            iterations: 3,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["Q", "beta", "C", "y0", "discrepancy", "samples"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
