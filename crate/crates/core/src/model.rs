//! Core point-process types and closed-form evaluations.
//!
//! A self-exciting point process has conditional intensity
//!
//! ```text
//! λ(t) = η + K · Σ_{T_i < t} g(t − T_i)
//! ```
//!
//! with baseline `η`, branching factor `K` and a triggering density `g`
//! that is either exponential, `β e^{−βt}`, or power law,
//! `(γ − 1)(1 + t)^{−γ}`. Times are measured in days.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nondecreasing, finite, nonnegative event timestamps in days.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EventTimes(Vec<f64>);

impl EventTimes {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidTimes(format!(
                    "time {t} at position {i} is not finite and nonnegative"
                )));
            }
            if i > 0 && t < times[i - 1] {
                return Err(Error::InvalidTimes(format!(
                    "times decrease at position {i}: {} > {t}",
                    times[i - 1]
                )));
            }
        }
        Ok(Self(times))
    }

    /// Sorts the input before validating it.
    pub fn from_unsorted(mut times: Vec<f64>) -> Result<Self> {
        times.sort_by(f64::total_cmp);
        Self::new(times)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<f64> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// Shifts every time so the first event is at zero.
    pub fn rebased(&self) -> Self {
        match self.first() {
            Some(t0) => Self(self.0.iter().map(|&t| t - t0).collect()),
            None => Self::empty(),
        }
    }

    /// Sub-sequence of events with `start <= t < end`, times unchanged.
    pub fn between(&self, start: f64, end: f64) -> Self {
        let lo = self.0.partition_point(|&t| t < start);
        let hi = self.0.partition_point(|&t| t < end);
        Self(self.0[lo..hi.max(lo)].to_vec())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for EventTimes {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EventTimes> for Vec<f64> {
    fn from(t: EventTimes) -> Self {
        t.0
    }
}

/// Inter-event times in the unit of the source timestamps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Iets(Vec<f64>);

impl Iets {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidTimes(format!(
                "inter-event time {v} is not finite and nonnegative"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Multiplies every value by `factor` (must be finite and nonnegative).
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[serde(rename = "exp")]
    Exponential,
    #[serde(rename = "powerlaw")]
    PowerLaw,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exp",
            KernelFamily::PowerLaw => "powerlaw",
        }
    }

    /// Name of the single shape parameter of the family.
    pub fn param_name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "beta",
            KernelFamily::PowerLaw => "gamma",
        }
    }

    pub fn with_param(self, value: f64) -> TriggeringKernel {
        match self {
            KernelFamily::Exponential => TriggeringKernel::Exponential { beta: value },
            KernelFamily::PowerLaw => TriggeringKernel::PowerLaw { gamma: value },
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(KernelFamily::Exponential),
            "powerlaw" | "power-law" | "pl" => Ok(KernelFamily::PowerLaw),
            other => Err(Error::Config(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// Triggering density on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TriggeringKernel {
    /// `β e^{−βt}`, decay rate `β > 0` per day.
    #[serde(rename = "exp")]
    Exponential { beta: f64 },
    /// `(γ − 1)(1 + t)^{−γ}`, tail index `γ > 1`.
    #[serde(rename = "powerlaw")]
    PowerLaw { gamma: f64 },
}

impl TriggeringKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TriggeringKernel::Exponential { beta } if !(beta.is_finite() && beta > 0.0) => Err(
                Error::ParameterDomain(format!("exponential decay beta must be > 0, got {beta}")),
            ),
            TriggeringKernel::PowerLaw { gamma } if !(gamma.is_finite() && gamma > 1.0) => Err(
                Error::ParameterDomain(format!("power-law index gamma must be > 1, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            TriggeringKernel::Exponential { .. } => KernelFamily::Exponential,
            TriggeringKernel::PowerLaw { .. } => KernelFamily::PowerLaw,
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            TriggeringKernel::Exponential { beta } => beta,
            TriggeringKernel::PowerLaw { gamma } => gamma,
        }
    }

    /// Density `g(t)`; zero for negative lags.
    #[inline]
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            TriggeringKernel::Exponential { beta } => beta * (-beta * t).exp(),
            TriggeringKernel::PowerLaw { gamma } => (gamma - 1.0) * (1.0 + t).powf(-gamma),
        }
    }

    /// `∫₀ᵗ g`, the kernel mass released by lag `t`.
    #[inline]
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            TriggeringKernel::Exponential { beta } => -(-beta * t).exp_m1(),
            TriggeringKernel::PowerLaw { gamma } => -((-(gamma - 1.0)) * t.ln_1p()).exp_m1(),
        }
    }
}

/// Baseline rate, branching factor and triggering kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeppParams {
    pub eta: f64,
    pub k: f64,
    pub kernel: TriggeringKernel,
}

impl SeppParams {
    pub fn new(eta: f64, k: f64, kernel: TriggeringKernel) -> Self {
        Self { eta, k, kernel }
    }

    pub fn exponential(eta: f64, k: f64, beta: f64) -> Self {
        Self::new(eta, k, TriggeringKernel::Exponential { beta })
    }

    pub fn power_law(eta: f64, k: f64, gamma: f64) -> Self {
        Self::new(eta, k, TriggeringKernel::PowerLaw { gamma })
    }

    /// Rejects negative or non-finite baselines and invalid kernels.
    /// The branching factor may take any finite value.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "baseline eta must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if !self.k.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "branching factor must be finite, got {}",
                self.k
            )));
        }
        self.kernel.validate()
    }

    pub fn is_stationary(&self) -> bool {
        (0.0..1.0).contains(&self.k)
    }
}

/// `λ(t)` given the events of `history` strictly before `t`.
pub fn conditional_intensity(params: &SeppParams, history: &EventTimes, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "evaluation time must be >= 0, got {t}"
        )));
    }
    let past = history.as_slice().partition_point(|&s| s < t);
    let excitation: f64 = history.as_slice()[..past]
        .iter()
        .map(|&s| params.kernel.density(t - s))
        .sum();
    Ok(params.eta + params.k * excitation)
}

/// Transformed times `Λ(T_i) = ∫₀^{T_i} λ` for every event.
///
/// Exponential kernels use the linear recursion on
/// `A_i = Σ_{k<i} e^{−β(T_i − T_k)}`; power-law kernels sum directly.
pub fn compensator(params: &SeppParams, times: &EventTimes) -> Result<Vec<f64>> {
    params.validate()?;
    if times.is_empty() {
        return Err(Error::InsufficientData(
            "compensator needs at least one event".into(),
        ));
    }
    let ts = times.as_slice();
    let mut out = Vec::with_capacity(ts.len());
    match params.kernel {
        TriggeringKernel::Exponential { beta } => {
            let mut decayed = 0.0;
            for (i, &t) in ts.iter().enumerate() {
                if i > 0 {
                    decayed = (-beta * (t - ts[i - 1])).exp() * (1.0 + decayed);
                }
                out.push(params.eta * t + params.k * (i as f64 - decayed));
            }
        }
        TriggeringKernel::PowerLaw { .. } => {
            for (i, &t) in ts.iter().enumerate() {
                let released: f64 = ts[..i].iter().map(|&s| params.kernel.cdf(t - s)).sum();
                out.push(params.eta * t + params.k * released);
            }
        }
    }
    Ok(out)
}

/// `Λ(t)` at an arbitrary time using the events strictly before `t`.
pub fn compensator_at(params: &SeppParams, times: &EventTimes, t: f64) -> Result<f64> {
    params.validate()?;
    let past = times.as_slice().partition_point(|&s| s < t);
    let released: f64 = times.as_slice()[..past]
        .iter()
        .map(|&s| params.kernel.cdf(t - s))
        .sum();
    Ok(params.eta * t + params.k * released)
}

pub fn inter_event_times(times: &EventTimes) -> Result<Iets> {
    if times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 events for inter-event times, got {}",
            times.len()
        )));
    }
    Ok(Iets(
        times.as_slice().windows(2).map(|w| w[1] - w[0]).collect(),
    ))
}

/// Burstiness `B = (σ − τ̄)/(σ + τ̄)` with the n−1 sample deviation.
pub fn burstiness(iets: &Iets) -> Result<f64> {
    let v = iets.as_slice();
    if v.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "burstiness needs at least 2 inter-event times, got {}",
            v.len()
        )));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::DegenerateInput(
            "inter-event times have zero mean".into(),
        ));
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    Ok((sd - mean) / (sd + mean))
}

/// Sample autocorrelations at lags `1..=max_lag`, divisor-n convention.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 || series.len() <= max_lag {
        return Err(Error::InsufficientData(format!(
            "autocorrelation needs 1 <= max_lag < len, got lag {max_lag} for length {}",
            series.len()
        )));
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateInput("series has zero variance".into()));
    }
    Ok((1..=max_lag)
        .map(|h| {
            dev[..n - h]
                .iter()
                .zip(&dev[h..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}
