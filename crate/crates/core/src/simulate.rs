//! Seeded samplers for the processes the estimators are checked against.
//!
//! All samplers draw from `ChaCha8Rng::seed_from_u64(seed)` and split work
//! across ChaCha streams so that independent pieces never share draws:
//!
//! - [`simulate_sepp`]: stream 0.
//! - [`simulate_nhpp`]: stream `i` for segment `i`.
//! - [`simulate_three_phase`]: stream 0 for the startup SEPP, stream
//!   `d + 1` for the `d`-th day after the startup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EventTimes, SeppParams, TriggeringKernel};

/// How long a SEPP simulation runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimStop {
    /// Keep every event in `[0, horizon]`.
    Horizon(f64),
    /// Stop at the given number of events.
    Count(usize),
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unit-rate exponential variate.
#[inline]
fn unit_exp(rng: &mut impl Rng) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    -(1.0 - rng.random::<f64>()).ln()
}

/// Ogata thinning sample of a SEPP started empty at time zero.
pub fn simulate_sepp(params: &SeppParams, stop: SimStop, seed: u64) -> Result<EventTimes> {
    let mut rng = stream_rng(seed, 0);
    sepp_with_rng(params, stop, &mut rng)
}

fn sepp_with_rng(params: &SeppParams, stop: SimStop, rng: &mut ChaCha8Rng) -> Result<EventTimes> {
    params.validate()?;
    if params.k < 0.0 {
        return Err(Error::ParameterDomain(
            "simulation needs a nonnegative branching factor".into(),
        ));
    }
    let (horizon, target) = match stop {
        SimStop::Horizon(h) => {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "horizon must be >= 0, got {h}"
                )));
            }
            (h, usize::MAX)
        }
        SimStop::Count(n) => {
            if n > 0 && !params.is_stationary() {
                return Err(Error::Nonterminating(format!(
                    "count-limited simulation needs K < 1, got K = {}",
                    params.k
                )));
            }
            if n > 0 && params.eta <= 0.0 {
                return Err(Error::Nonterminating(
                    "count-limited simulation needs eta > 0".into(),
                ));
            }
            (f64::INFINITY, n)
        }
    };
    let mut events = Vec::new();
    if target == 0 {
        return Ok(EventTimes::empty());
    }
    match params.kernel {
        TriggeringKernel::Exponential { beta } => {
            // excitation = Σ β e^{−β(t − T_i)} over accepted events.
            let mut t = 0.0;
            let mut excitation = 0.0;
            loop {
                let bound = params.eta + params.k * excitation;
                if bound <= 0.0 {
                    break;
                }
                let wait = unit_exp(rng) / bound;
                t += wait;
                if t > horizon {
                    break;
                }
                excitation *= (-beta * wait).exp();
                let lam = params.eta + params.k * excitation;
                if rng.random::<f64>() * bound <= lam {
                    events.push(t);
                    excitation += beta;
                    if events.len() >= target {
                        break;
                    }
                }
            }
        }
        TriggeringKernel::PowerLaw { .. } => {
            let kernel = params.kernel;
            let excite = |events: &[f64], t: f64| -> f64 {
                events.iter().map(|&s| kernel.density(t - s)).sum::<f64>()
            };
            let mut t = 0.0;
            let mut bound = params.eta;
            loop {
                if bound <= 0.0 {
                    break;
                }
                t += unit_exp(rng) / bound;
                if t > horizon {
                    break;
                }
                let lam = params.eta + params.k * excite(&events, t);
                if rng.random::<f64>() * bound <= lam {
                    events.push(t);
                    if events.len() >= target {
                        break;
                    }
                    bound = lam + params.k * kernel.density(0.0);
                } else {
                    bound = lam;
                }
            }
        }
    }
    EventTimes::new(events)
}

/// Piecewise-constant rate over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseRate {
    start: f64,
    end: f64,
    breakpoints: Vec<f64>,
    rates: Vec<f64>,
}

impl PiecewiseRate {
    /// `breakpoints` are the interior segment boundaries; there must be
    /// exactly one more rate than interior breakpoints.
    pub fn new(start: f64, end: f64, breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::ParameterDomain(format!(
                "invalid horizon [{start}, {end})"
            )));
        }
        if rates.len() != breakpoints.len() + 1 {
            return Err(Error::ParameterDomain(format!(
                "{} interior breakpoints need {} rates, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                rates.len()
            )));
        }
        let mut prev = start;
        for &b in &breakpoints {
            if !(b.is_finite() && b >= prev && b <= end) {
                return Err(Error::ParameterDomain(format!(
                    "breakpoints must be nondecreasing within the horizon, got {b}"
                )));
            }
            prev = b;
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::ParameterDomain(format!(
                "rates must be >= 0, got {r}"
            )));
        }
        Ok(Self {
            start,
            end,
            breakpoints,
            rates,
        })
    }

    pub fn constant(start: f64, end: f64, rate: f64) -> Result<Self> {
        Self::new(start, end, Vec::new(), vec![rate])
    }

    /// `(segment start, segment end, rate)` triples covering the horizon.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let mut edges = Vec::with_capacity(self.rates.len() + 1);
        edges.push(self.start);
        edges.extend_from_slice(&self.breakpoints);
        edges.push(self.end);
        (0..self.rates.len()).map(move |i| (edges[i], edges[i + 1], self.rates[i]))
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if t < self.start || t >= self.end {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.rates[i]
    }
}

fn poisson_segment(rng: &mut impl Rng, start: f64, end: f64, rate: f64, out: &mut Vec<f64>) {
    if rate <= 0.0 || end <= start {
        return;
    }
    let mut t = start;
    loop {
        t += unit_exp(rng) / rate;
        if t >= end {
            break;
        }
        out.push(t);
    }
}

/// Concatenated homogeneous Poisson samples, one stream per segment.
pub fn simulate_nhpp(rate: &PiecewiseRate, seed: u64) -> Result<EventTimes> {
    let mut out = Vec::new();
    for (i, (a, b, r)) in rate.segments().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        poisson_segment(&mut rng, a, b, r, &mut out);
    }
    EventTimes::new(out)
}

/// A startup SEPP followed by day-by-day Poisson activity with a nightly
/// inactive window. Time zero is local midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreePhaseConfig {
    pub startup: SeppParams,
    pub startup_days: f64,
    /// Active-hours intensity for each day after the startup, in events per
    /// day of active time (the expected count of a day is
    /// `rate · active_hours / 24`).
    pub daily_rates: Vec<f64>,
    /// Inactive local hours `[start, end)`; wraps past midnight when
    /// `start > end`, empty when equal.
    pub inactive_window: (f64, f64),
    pub seed: u64,
}

impl ThreePhaseConfig {
    pub fn validate(&self) -> Result<()> {
        self.startup.validate()?;
        if !(self.startup_days.is_finite() && self.startup_days >= 0.0) {
            return Err(Error::ParameterDomain(
                "startup duration must be >= 0".into(),
            ));
        }
        let (s, e) = self.inactive_window;
        if !((0.0..24.0).contains(&s) && (0.0..24.0).contains(&e)) {
            return Err(Error::ParameterDomain(format!(
                "inactive window hours must lie in [0, 24), got [{s}, {e})"
            )));
        }
        if let Some(r) = self
            .daily_rates
            .iter()
            .find(|r| !(r.is_finite() && **r >= 0.0))
        {
            return Err(Error::ParameterDomain(format!(
                "daily rates must be >= 0, got {r}"
            )));
        }
        Ok(())
    }

    /// First day (integer days from the origin) of the Poisson phase.
    pub fn first_daily_day(&self) -> i64 {
        self.startup_days.floor() as i64
    }

    /// Active sub-intervals of day `d`, in days from the origin.
    pub fn active_intervals(&self, day: i64) -> Vec<(f64, f64)> {
        let (s, e) = self.inactive_window;
        let d = day as f64;
        let h = |x: f64| d + x / 24.0;
        let raw = if s == e {
            vec![(h(0.0), h(24.0))]
        } else if s < e {
            vec![(h(0.0), h(s)), (h(e), h(24.0))]
        } else {
            vec![(h(e), h(s))]
        };
        raw.into_iter()
            .map(|(a, b)| (a.max(self.startup_days), b))
            .filter(|(a, b)| b > a)
            .collect()
    }
}

pub fn simulate_three_phase(config: &ThreePhaseConfig) -> Result<EventTimes> {
    config.validate()?;
    let mut out = if config.startup_days > 0.0 {
        let mut rng = stream_rng(config.seed, 0);
        sepp_with_rng(
            &config.startup,
            SimStop::Horizon(config.startup_days),
            &mut rng,
        )?
        .into_vec()
    } else {
        Vec::new()
    };
    // Events landing exactly on the horizon belong to the first day.
    out.retain(|&t| t < config.startup_days);
    let first = config.first_daily_day();
    for (i, &rate) in config.daily_rates.iter().enumerate() {
        let mut rng = stream_rng(config.seed, i as u64 + 1);
        for (a, b) in config.active_intervals(first + i as i64) {
            poisson_segment(&mut rng, a, b, rate, &mut out);
        }
    }
    EventTimes::new(out)
}
