use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::DEFAULT_ALPHAS;
use crate::inar::InarConfig;
use crate::ingest::TzOffset;
use crate::model::KernelFamily;
use crate::nhpp::ActiveHoursPolicy;

pub const DEFAULT_BREAKDOWN_RUN: usize = 3;

/// Effective settings of one run. Thread count is deliberately absent: it
/// never changes numerical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub input: Option<PathBuf>,
    pub tz_offset: TzOffset,
    /// Inclusive first local date.
    pub from: Option<NaiveDate>,
    /// Exclusive last local date.
    pub to: Option<NaiveDate>,
    pub window_size: usize,
    pub inar_p: usize,
    /// Bin width in days.
    pub inar_delta: f64,
    pub kernel: KernelFamily,
    /// Inactive local hours `[start, end)`.
    pub inactive: (f64, f64),
    pub alphas: Vec<f64>,
    pub seed: u64,
    /// Add seeded sub-second jitter to break timestamp ties.
    pub jitter: bool,
    pub breakdown_run: usize,
    pub out_dir: PathBuf,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            input: None,
            tz_offset: TzOffset::default(),
            from: None,
            to: None,
            window_size: 200,
            inar_p: 150,
            inar_delta: 1.0 / 288.0,
            kernel: KernelFamily::Exponential,
            inactive: (1.0, 8.0),
            alphas: DEFAULT_ALPHAS.to_vec(),
            seed: 0,
            jitter: false,
            breakdown_run: DEFAULT_BREAKDOWN_RUN,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window_size == 0 {
            return bad("window size must be > 0".into());
        }
        if self.inar_p == 0 {
            return bad("INAR order p must be > 0".into());
        }
        if !(self.inar_delta.is_finite() && self.inar_delta > 0.0) {
            return bad(format!("bin width must be > 0, got {}", self.inar_delta));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad(format!(
                "alpha levels must lie in (0, 1), got {:?}",
                self.alphas
            ));
        }
        if self.breakdown_run == 0 {
            return bad("breakdown run length must be > 0".into());
        }
        if let (Some(a), Some(b)) = (self.from, self.to) {
            if b < a {
                return bad(format!("period end {b} precedes start {a}"));
            }
        }
        self.tz_offset.validate()?;
        self.policy().validate()
    }

    pub fn inar(&self) -> InarConfig {
        InarConfig {
            p: self.inar_p,
            delta: self.inar_delta,
            family: self.kernel,
        }
    }

    /// Active-hours policy on the already-shifted local clock.
    pub fn policy(&self) -> ActiveHoursPolicy {
        ActiveHoursPolicy {
            inactive_start_hour: self.inactive.0,
            inactive_end_hour: self.inactive.1,
            tz_offset_minutes: 0,
        }
    }
}

/// Parses `"HH-HH"` (fractional hours allowed) into an inactive window.
pub fn parse_inactive(s: &str) -> Result<(f64, f64)> {
    let err = || Error::Config(format!("inactive window {s:?} is not of the form HH-HH"));
    let (a, b) = s.split_once('-').ok_or_else(err)?;
    let a: f64 = a.trim().parse().map_err(|_| err())?;
    let b: f64 = b.trim().parse().map_err(|_| err())?;
    ActiveHoursPolicy::new(a, b)?;
    Ok((a, b))
}
