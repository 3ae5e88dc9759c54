//! Stopping threshold `zeta(t, delta, rho) = ln(C t^(1 + rho) / delta)`.
//!
//! `C` must satisfy
//!
//! ```text
//! S(C) = sum_{t >= 1} e^(K+1) / K^K * (ln^2(C t^(1+rho)) ln t)^K / t^(1+rho) <= C.
//! ```
//!
//! `S` is evaluated as a compensated partial sum plus a rigorous bound on the
//! tail; with `u = ln t` the tail integrand is a polynomial times `e^(-rho u)`,
//! which integrates in closed form.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::{self, CompensatedSum};

/// `ln(1e300)`, the upper end of the search bracket for `C`.
const LN_C_MAX: f64 = 690.775_527_898_213_7;
/// Explicit summation stops here at the latest.
const MAX_EXPLICIT_TERMS: u64 = 200_000;
const RELATIVE_CUTOFF: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ThresholdError {
    #[error("the series constant needs at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("rho must be positive and finite, got {0}")]
    InvalidRho(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("no C below 1e300 satisfies the series inequality")]
    NoFiniteC,
}

/// How the constant `C` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `C` from the series inequality; keeps the delta-correctness guarantee.
    Certified,
    /// `C = 1`. Exploratory only: the error guarantee no longer holds.
    Practical,
}

/// Stopping threshold parameters. `C` is stored as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    ln_c: f64,
    rho: f64,
    delta: f64,
}

impl Threshold {
    pub fn new(
        mode: ThresholdMode,
        num_arms: usize,
        rho: f64,
        delta: f64,
    ) -> Result<Self, ThresholdError> {
        let ln_c = match mode {
            ThresholdMode::Certified => math::ln(compute_c(num_arms, rho)?),
            ThresholdMode::Practical => 0.0,
        };
        Self::with_ln_c(ln_c, rho, delta)
    }

    pub fn with_ln_c(ln_c: f64, rho: f64, delta: f64) -> Result<Self, ThresholdError> {
        check_rho(rho)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ThresholdError::InvalidDelta(delta));
        }
        Ok(Threshold { ln_c, rho, delta })
    }

    /// Same constant and `rho`, another `delta`.
    pub fn with_delta(&self, delta: f64) -> Result<Self, ThresholdError> {
        Self::with_ln_c(self.ln_c, self.rho, delta)
    }

    pub fn c_const(&self) -> f64 {
        math::exp(self.ln_c)
    }

    pub fn ln_c(&self) -> f64 {
        self.ln_c
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `ln C + (1 + rho) ln t + ln(1 / delta)`, for `t >= 1`.
    pub fn zeta(&self, t: u64) -> f64 {
        self.ln_c + (1.0 + self.rho) * math::ln(t as f64) + math::ln(1.0 / self.delta)
    }
}

pub fn zeta(threshold: &Threshold, t: u64) -> f64 {
    threshold.zeta(t)
}

fn check_rho(rho: f64) -> Result<(), ThresholdError> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(ThresholdError::InvalidRho(rho))
    }
}

/// Smallest `C >= 1` (up to bisection precision) with `S(C) <= C`.
pub fn compute_c(num_arms: usize, rho: f64) -> Result<f64, ThresholdError> {
    if num_arms < 2 {
        return Err(ThresholdError::TooFewArms(num_arms));
    }
    check_rho(rho)?;
    let satisfied = |ln_c: f64| math::ln(series_upper_bound(num_arms, rho, ln_c)) <= ln_c;
    if satisfied(0.0) {
        return Ok(1.0);
    }
    if !satisfied(LN_C_MAX) {
        return Err(ThresholdError::NoFiniteC);
    }
    let (mut lo, mut hi) = (0.0, LN_C_MAX);
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if satisfied(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(math::exp(hi))
}

/// Upper bound on `S(C)` for `C = e^ln_c`: explicit terms until they fall
/// below `1e-16` of the running sum past the peak, then an integral tail.
pub fn series_upper_bound(num_arms: usize, rho: f64, ln_c: f64) -> f64 {
    let series = Series::new(num_arms, rho, ln_c);
    let peak = series.log_term_peak(0.0);
    let mut acc = CompensatedSum::default();
    // The t = 1 term vanishes (ln 1 = 0).
    let mut t: u64 = 2;
    loop {
        let u = math::ln(t as f64);
        let term = math::exp(series.log_term(u));
        acc.add(term);
        let past_peak = u >= peak;
        if (past_peak && term < RELATIVE_CUTOFF * acc.value()) || t >= MAX_EXPLICIT_TERMS {
            break;
        }
        t += 1;
    }
    acc.value() + series.tail_bound(math::ln(t as f64))
}

/// Summand `A (u (a + b u)^2)^K e^(-(1+rho) u)` in `u = ln t`, with
/// `A = e^(K+1) / K^K`, `a = ln C`, `b = 1 + rho`.
struct Series {
    k: usize,
    rho: f64,
    a: f64,
    b: f64,
    ln_prefactor: f64,
}

impl Series {
    fn new(num_arms: usize, rho: f64, ln_c: f64) -> Self {
        let k = num_arms as f64;
        Series {
            k: num_arms,
            rho,
            a: ln_c,
            b: 1.0 + rho,
            ln_prefactor: (k + 1.0) - k * math::ln(k),
        }
    }

    fn log_term(&self, u: f64) -> f64 {
        let l = self.a + self.b * u;
        self.ln_prefactor + self.k as f64 * math::ln(u * l * l) - self.b * u
    }

    /// Maximizer over `u >= from` of the log-concave summand.
    fn log_term_peak(&self, from: f64) -> f64 {
        let k = self.k as f64;
        let slope = |u: f64| k * (1.0 / u + 2.0 * self.b / (self.a + self.b * u)) - self.b;
        let start = from.max(1e-12);
        if slope(start) <= 0.0 {
            return start;
        }
        let mut hi = start.max(1.0);
        while slope(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = start;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Bound on `sum_{t > T}` with `u0 = ln T`: the integral from `T` of the
    /// unimodal summand plus its supremum there.
    fn tail_bound(&self, u0: f64) -> f64 {
        // Integrand in u: A (u (a + b u)^2)^K e^(-rho u).
        let base = [0.0, self.a * self.a, 2.0 * self.a * self.b, self.b * self.b];
        let mut poly = vec![1.0];
        for _ in 0..self.k {
            poly = poly_mul(&poly, &base);
        }
        // int_{u0}^inf P(u) e^{-rho u} du = e^{-rho u0} sum_j P^(j)(u0) / rho^(j+1)
        let mut derivative = poly;
        let mut integral = CompensatedSum::default();
        let mut rho_power = self.rho;
        while !derivative.is_empty() {
            integral.add(poly_eval(&derivative, u0) / rho_power);
            derivative = poly_derivative(&derivative);
            rho_power *= self.rho;
        }
        let integral = math::exp(self.ln_prefactor - self.rho * u0) * integral.value();
        let sup = math::exp(self.log_term(self.log_term_peak(u0)));
        integral + sup
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}
