//! Day-by-day Poisson analysis with a nightly inactive window.
//!
//! Events are assigned to local calendar days `[00:00, 24:00)`. Events whose
//! local hour falls in the inactive window are dropped, and only gaps
//! between consecutive active events of the same active stretch count as
//! inter-event times: the gap that spans the inactive window is discarded
//! rather than stitched.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{ks_exp_estimated_rate, KsResult};
use crate::ingest::{date_of_day, EventStream};
use crate::model::{burstiness, Iets};

/// Days with fewer active events than this get no KS test.
pub const MIN_KS_EVENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveHoursPolicy {
    pub inactive_start_hour: f64,
    pub inactive_end_hour: f64,
    /// Extra shift applied on top of the stream's local clock.
    pub tz_offset_minutes: i32,
}

impl Default for ActiveHoursPolicy {
    fn default() -> Self {
        Self {
            inactive_start_hour: 1.0,
            inactive_end_hour: 8.0,
            tz_offset_minutes: 0,
        }
    }
}

impl ActiveHoursPolicy {
    pub fn new(inactive_start_hour: f64, inactive_end_hour: f64) -> Result<Self> {
        let p = Self {
            inactive_start_hour,
            inactive_end_hour,
            tz_offset_minutes: 0,
        };
        p.validate()?;
        Ok(p)
    }

    /// A policy that keeps every hour.
    pub fn always_active() -> Self {
        Self {
            inactive_start_hour: 0.0,
            inactive_end_hour: 0.0,
            tz_offset_minutes: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |h: f64| (0.0..24.0).contains(&h);
        if !(ok(self.inactive_start_hour) && ok(self.inactive_end_hour)) {
            return Err(Error::Config(format!(
                "inactive hours must lie in [0, 24), got [{}, {})",
                self.inactive_start_hour, self.inactive_end_hour
            )));
        }
        Ok(())
    }

    pub fn inactive_hours(&self) -> f64 {
        (self.inactive_end_hour - self.inactive_start_hour).rem_euclid(24.0)
    }

    pub fn active_hours(&self) -> f64 {
        24.0 - self.inactive_hours()
    }

    pub fn is_inactive(&self, hour: f64) -> bool {
        let (s, e) = (self.inactive_start_hour, self.inactive_end_hour);
        if s <= e {
            s <= hour && hour < e
        } else {
            hour >= s || hour < e
        }
    }

    /// Identifier of the active stretch containing an event at absolute
    /// local hour `abs_hour`. Stretches run from one inactive end to the
    /// next inactive start, so they may cross midnight.
    fn segment_id(&self, abs_hour: f64) -> i64 {
        if self.inactive_hours() == 0.0 {
            return 0;
        }
        ((abs_hour - self.inactive_end_hour) / 24.0).floor() as i64
    }

    fn local(&self, stream: &EventStream, t: f64) -> (i64, f64) {
        stream.day_and_hour(t + self.tz_offset_minutes as f64 / 1440.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEvents {
    /// Days since the local day containing the stream origin.
    pub day_index: i64,
    pub date: NaiveDate,
    /// Local hours in `[0, 24)`, ascending.
    pub hours: Vec<f64>,
    /// Event times of the stream, aligned with `hours`.
    pub times: Vec<f64>,
}

/// Groups the stream into local days, from the first event's day to the
/// last event's day inclusive; days without events are present and empty.
pub fn split_days(stream: &EventStream, policy: &ActiveHoursPolicy) -> Result<Vec<DayEvents>> {
    policy.validate()?;
    let origin_day = stream.day_and_hour(0.0).0;
    let mut days: Vec<DayEvents> = Vec::new();
    for t in stream.times.iter() {
        let (day, hour) = policy.local(stream, t);
        let first = days.first().map(|d| d.day_index + origin_day);
        let start = first.unwrap_or(day);
        while days.len() as i64 <= day - start {
            let d = start + days.len() as i64;
            days.push(DayEvents {
                day_index: d - origin_day,
                date: date_of_day(d),
                hours: Vec::new(),
                times: Vec::new(),
            });
        }
        let slot = &mut days[(day - start) as usize];
        slot.hours.push(hour);
        slot.times.push(t);
    }
    Ok(days)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveDay {
    pub day_index: i64,
    pub date: NaiveDate,
    pub hours: Vec<f64>,
    /// Gaps in hours between consecutive active events of one stretch.
    pub iets: Vec<f64>,
    pub n_inactive: usize,
}

pub fn filter_active(day: &DayEvents, policy: &ActiveHoursPolicy) -> ActiveDay {
    let mut hours = Vec::with_capacity(day.hours.len());
    let mut iets = Vec::new();
    let mut prev: Option<(f64, i64)> = None;
    for &h in &day.hours {
        if policy.is_inactive(h) {
            continue;
        }
        let seg = policy.segment_id(day.day_index as f64 * 24.0 + h);
        if let Some((ph, ps)) = prev {
            if ps == seg {
                iets.push(h - ph);
            }
        }
        prev = Some((h, seg));
        hours.push(h);
    }
    ActiveDay {
        day_index: day.day_index,
        date: day.date,
        n_inactive: day.hours.len() - hours.len(),
        hours,
        iets,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRateEstimate {
    pub day_index: i64,
    pub date: NaiveDate,
    pub n_events: usize,
    pub active_hours: f64,
    pub rate_per_hour: f64,
    pub rate_per_day: f64,
    /// `None` when the test was skipped; see `ks_skip_reason`.
    pub ks: Option<KsResult>,
    pub ks_skip_reason: Option<String>,
}

impl DailyRateEstimate {
    pub fn ks_tested(&self) -> bool {
        self.ks.is_some()
    }
}

/// Poisson MLE `n / active_hours` plus an estimated-rate KS test on the
/// day's active gaps.
pub fn daily_rate(day: &ActiveDay, active_hours: f64, alphas: &[f64]) -> Result<DailyRateEstimate> {
    if !(active_hours > 0.0 && active_hours <= 24.0) {
        return Err(Error::Config(format!(
            "active hours must lie in (0, 24], got {active_hours}"
        )));
    }
    let n = day.hours.len();
    let rate = n as f64 / active_hours;
    let (ks, reason) = if n < MIN_KS_EVENTS {
        (None, Some(format!("{n} active events < {MIN_KS_EVENTS}")))
    } else {
        match Iets::new(day.iets.clone()).and_then(|s| ks_exp_estimated_rate(&s, alphas)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    Ok(DailyRateEstimate {
        day_index: day.day_index,
        date: day.date,
        n_events: n,
        active_hours,
        rate_per_hour: rate,
        rate_per_day: rate * 24.0,
        ks,
        ks_skip_reason: reason,
    })
}

/// Splits, filters and estimates every day of the stream.
pub fn analyze_days(
    stream: &EventStream,
    policy: &ActiveHoursPolicy,
    alphas: &[f64],
) -> Result<Vec<DailyRateEstimate>> {
    let active_hours = policy.active_hours();
    split_days(stream, policy)?
        .iter()
        .map(|d| daily_rate(&filter_active(d, policy), active_hours, alphas))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekdayRate {
    /// ISO weekday, 1 = Monday.
    pub weekday: u32,
    pub n_days: usize,
    pub mean_rate_per_hour: Option<f64>,
    pub mean_rate_per_day: Option<f64>,
}

pub fn weekly_profile(daily: &[DailyRateEstimate]) -> Result<Vec<WeekdayRate>> {
    if daily.len() < 7 {
        return Err(Error::InsufficientData(format!(
            "weekly profile needs at least 7 days, got {}",
            daily.len()
        )));
    }
    let mut sums = [(0usize, 0.0f64); 7];
    for d in daily {
        let w = d.date.weekday().number_from_monday() as usize - 1;
        sums[w].0 += 1;
        sums[w].1 += d.rate_per_hour;
    }
    Ok(sums
        .iter()
        .enumerate()
        .map(|(i, &(n, s))| {
            let mean = (n > 0).then(|| s / n as f64);
            WeekdayRate {
                weekday: i as u32 + 1,
                n_days: n,
                mean_rate_per_hour: mean,
                mean_rate_per_day: mean.map(|m| m * 24.0),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstinessComparison {
    pub b_all: f64,
    pub b_active: f64,
    pub n_iets_all: usize,
    pub n_iets_active: usize,
}

/// Gaps (in days) between consecutive active events of the same stretch,
/// across the whole stream.
pub fn active_iets(stream: &EventStream, policy: &ActiveHoursPolicy) -> Result<Iets> {
    policy.validate()?;
    let mut out = Vec::new();
    let mut prev: Option<(f64, i64)> = None;
    for t in stream.times.iter() {
        let (day, hour) = policy.local(stream, t);
        if policy.is_inactive(hour) {
            continue;
        }
        let seg = policy.segment_id(day as f64 * 24.0 + hour);
        if let Some((pt, ps)) = prev {
            if ps == seg {
                out.push(t - pt);
            }
        }
        prev = Some((t, seg));
    }
    Iets::new(out)
}

pub fn burstiness_comparison(
    stream: &EventStream,
    policy: &ActiveHoursPolicy,
) -> Result<BurstinessComparison> {
    let all = crate::model::inter_event_times(&stream.times)?;
    let active = active_iets(stream, policy)?;
    Ok(BurstinessComparison {
        b_all: burstiness(&all)?,
        b_active: burstiness(&active)?,
        n_iets_all: all.len(),
        n_iets_active: active.len(),
    })
}

/// Calendar year of each day, for grouping acceptance tables.
pub fn group_by_year(daily: &[DailyRateEstimate]) -> BTreeMap<i32, Vec<&DailyRateEstimate>> {
    let mut out: BTreeMap<i32, Vec<&DailyRateEstimate>> = BTreeMap::new();
    for d in daily {
        out.entry(d.date.year()).or_default().push(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventTimes;

    fn stream_of_hours(hours: &[f64]) -> EventStream {
        let t: Vec<f64> = hours.iter().map(|h| h / 24.0).collect();
        EventStream::new(EventTimes::new(t).unwrap(), 0)
    }

    fn day_of(hours: &[f64]) -> DayEvents {
        DayEvents {
            day_index: 0,
            date: date_of_day(0),
            hours: hours.to_vec(),
            times: hours.iter().map(|h| h / 24.0).collect(),
        }
    }

    #[test]
    fn same_day_grouping_and_midnight() {
        let p = ActiveHoursPolicy::always_active();
        let days = split_days(&stream_of_hours(&[10.0, 23.9]), &p).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].hours.len(), 2);

        let days = split_days(&stream_of_hours(&[10.0, 24.0, 50.0]), &p).unwrap();
        assert_eq!(days.len(), 3);
        assert_eq!(days[1].hours, vec![0.0]);
        assert_eq!(days[2].day_index, 2);
    }

    #[test]
    fn offset_moves_event_across_midnight() {
        let mut p = ActiveHoursPolicy::always_active();
        let s = stream_of_hours(&[23.5]);
        assert_eq!(split_days(&s, &p).unwrap()[0].day_index, 0);
        p.tz_offset_minutes = 60;
        let d = split_days(&s, &p).unwrap();
        assert_eq!(d[0].day_index, 1);
        assert!((d[0].hours[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn boundary_gap_is_dropped() {
        let p = ActiveHoursPolicy::new(1.0, 8.0).unwrap();
        let a = filter_active(&day_of(&[0.5, 7.0, 9.0, 10.0]), &p);
        assert_eq!(a.hours, vec![0.5, 9.0, 10.0]);
        assert_eq!(a.iets, vec![1.0]);
        assert_eq!(a.n_inactive, 1);

        let a = filter_active(&day_of(&[2.0, 3.0]), &p);
        assert!(a.hours.is_empty() && a.iets.is_empty());

        let a = filter_active(&day_of(&[9.0, 12.0, 20.0]), &p);
        assert_eq!(a.iets, vec![3.0, 8.0]);
    }

    #[test]
    fn wrapping_window() {
        let p = ActiveHoursPolicy::new(22.0, 6.0).unwrap();
        assert!(p.is_inactive(23.0) && p.is_inactive(0.0) && p.is_inactive(5.99));
        assert!(!p.is_inactive(6.0) && !p.is_inactive(21.9));
        assert_eq!(p.active_hours(), 16.0);
    }

    #[test]
    fn rate_is_count_over_hours() {
        let a = ActiveDay {
            day_index: 3,
            date: date_of_day(3),
            hours: vec![9.0; 34],
            iets: vec![0.5; 33],
            n_inactive: 0,
        };
        let r = daily_rate(&a, 17.0, &[0.05]).unwrap();
        assert_eq!(r.rate_per_hour, 2.0);
        assert_eq!(r.rate_per_day, 48.0);

        let empty = ActiveDay {
            hours: vec![],
            iets: vec![],
            ..a
        };
        let r = daily_rate(&empty, 17.0, &[0.05]).unwrap();
        assert_eq!(r.rate_per_hour, 0.0);
        assert!(r.ks.is_none() && r.ks_skip_reason.is_some());
        assert!(daily_rate(&empty, 0.0, &[0.05]).is_err());
    }

    fn est(day: i64, rate: f64) -> DailyRateEstimate {
        DailyRateEstimate {
            day_index: day,
            date: date_of_day(day),
            n_events: 0,
            active_hours: 24.0,
            rate_per_hour: rate,
            rate_per_day: rate * 24.0,
            ks: None,
            ks_skip_reason: None,
        }
    }

    #[test]
    fn weekly_profile_averages() {
        // 1970-01-05 was a Monday.
        let days: Vec<_> = (4..4 + 14)
            .map(|d| {
                let wd = date_of_day(d).weekday().number_from_monday();
                est(d, if wd >= 6 { 1.0 } else { 3.0 + d as f64 % 2.0 })
            })
            .collect();
        let prof = weekly_profile(&days).unwrap();
        assert_eq!(prof[5].mean_rate_per_hour, Some(1.0));
        assert_eq!(prof[6].mean_rate_per_hour, Some(1.0));
        assert_eq!(prof[0].mean_rate_per_hour, Some(3.5));
        assert!(prof.iter().all(|w| w.n_days == 2));
        assert!(weekly_profile(&days[..6]).is_err());
    }

    #[test]
    fn empty_window_keeps_all_gaps() {
        let s = stream_of_hours(&[0.5, 3.0, 7.5, 20.0, 30.0, 31.0, 47.5]);
        let c = burstiness_comparison(&s, &ActiveHoursPolicy::always_active()).unwrap();
        assert_eq!(c.b_all, c.b_active);
        assert_eq!(c.n_iets_all, c.n_iets_active);
    }

    #[test]
    fn active_gaps_cross_midnight_only_within_stretch() {
        let p = ActiveHoursPolicy::new(1.0, 8.0).unwrap();
        // 23:00 day 0 -> 00:30 day 1 is one stretch; 00:30 -> 09:00 is not.
        let s = stream_of_hours(&[23.0, 24.5, 33.0, 34.0]);
        let g = active_iets(&s, &p).unwrap();
        let hours: Vec<f64> = g
            .as_slice()
            .iter()
            .map(|d| (d * 24.0 * 1e6).round() / 1e6)
            .collect();
        assert_eq!(hours, vec![1.5, 1.0]);
    }
}
