//! Time-rescaling residuals and Kolmogorov-Smirnov tests against the
//! exponential distribution.
//!
//! Under the true model the compensator increments `Λ(T_i) − Λ(T_{i−1})`
//! are i.i.d. unit-rate exponential. The KS statistic is computed exactly
//! from the order statistics and the p-value from the asymptotic
//! Kolmogorov distribution for every sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compensator, EventTimes, Iets, SeppParams};

pub const DEFAULT_ALPHAS: [f64; 2] = [0.01, 0.05];

/// Samples smaller than this carry a small-sample flag.
pub const SMALL_SAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsDecision {
    pub alpha: f64,
    pub accept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    pub p_value: f64,
    pub decisions: Vec<KsDecision>,
    /// The null rate was estimated from the same data.
    pub estimated_rate: bool,
    /// Rate used to scale the samples before testing (1 for the unit null).
    pub rate: f64,
    pub small_sample: bool,
}

impl KsResult {
    pub fn accepts(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Compensator increments of `times` under `params`. No stationarity
/// guard is applied.
pub fn transformed_iets(params: &SeppParams, times: &EventTimes) -> Result<Iets> {
    if times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 events to transform, got {}",
            times.len()
        )));
    }
    let lam = compensator(params, times)?;
    // Increments are clamped at zero so that negative-K fits (whose
    // compensator may decrease) still yield a valid sample.
    Iets::new(lam.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`, the limiting survival function
/// of `√n D`.
///
/// For `λ < 1` the alternating series converges slowly, so the equivalent
/// theta-function form `1 − (√(2π)/λ) Σ_{k≥1} e^{−(2k−1)²π²/(8λ²)}` is used.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda.is_nan() {
        return f64::NAN;
    }
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        if term < 1e-12 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `D = sup_x |F_n(x) − F(x)|` for a continuous null CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

fn ks_result(samples: &[f64], rate: f64, estimated: bool, alphas: &[f64]) -> KsResult {
    let n = samples.len();
    let d = ks_statistic(samples, |x| -(-rate * x).exp_m1());
    let p_value = kolmogorov_survival((n as f64).sqrt() * d);
    KsResult {
        statistic: d,
        n,
        p_value,
        decisions: alphas
            .iter()
            .map(|&alpha| KsDecision {
                alpha,
                accept: p_value >= alpha,
            })
            .collect(),
        estimated_rate: estimated,
        rate,
        small_sample: n < SMALL_SAMPLE,
    }
}

/// KS test against the unit-rate exponential.
pub fn ks_exp_unit(samples: &Iets, alphas: &[f64]) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "KS test needs at least one sample".into(),
        ));
    }
    // Iets already guarantees finite, nonnegative values.
    Ok(ks_result(samples.as_slice(), 1.0, false, alphas))
}

/// KS test against the exponential with rate `1/mean`, used as if the
/// rate were known (no Lilliefors correction, hence conservative).
pub fn ks_exp_estimated_rate(samples: &Iets, alphas: &[f64]) -> Result<KsResult> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "estimated-rate KS test needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mean = samples.mean();
    if mean <= 0.0 {
        return Err(Error::DegenerateInput("samples have zero mean".into()));
    }
    let scaled = samples.scaled(1.0 / mean);
    let mut r = ks_result(scaled.as_slice(), 1.0, true, alphas);
    r.rate = 1.0 / mean;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRow {
    pub alpha: f64,
    pub accepted: usize,
    pub total: usize,
    /// `accepted / total`; `None` for an empty batch.
    pub fraction: Option<f64>,
}

/// Share of tests with `p ≥ α`, for each `α`.
pub fn acceptance_table(results: &[KsResult], alphas: &[f64]) -> Vec<AcceptanceRow> {
    alphas
        .iter()
        .map(|&alpha| {
            let accepted = results.iter().filter(|r| r.accepts(alpha)).count();
            let total = results.len();
            AcceptanceRow {
                alpha,
                accepted,
                total,
                fraction: (total > 0).then(|| accepted as f64 / total as f64),
            }
        })
        .collect()
}
