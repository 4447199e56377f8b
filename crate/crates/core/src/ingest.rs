//! Edge-list ingestion and event-count windowing.
//!
//! Input files are whitespace-separated text, one edge per line:
//!
//! ```text
//! % comment            (lines starting with '%' or '#' are skipped)
//! src dst timestamp
//! src dst weight timestamp
//! ```
//!
//! Timestamps are UNIX epoch seconds. The writer emits the three-column
//! form.

use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EventTimes;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEdgeRecord {
    pub src: String,
    pub dst: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line_number: usize,
    pub content: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedEdges {
    pub records: Vec<RawEdgeRecord>,
    pub malformed: Vec<MalformedLine>,
    pub comments: usize,
}

fn parse_line(line: &str) -> std::result::Result<Option<RawEdgeRecord>, String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
        return Ok(None);
    }
    let cols: Vec<&str> = trimmed.split_whitespace().collect();
    let ts_col = match cols.len() {
        3 => cols[2],
        4 => cols[3],
        n => return Err(format!("expected 3 or 4 columns, found {n}")),
    };
    let timestamp: i64 = ts_col
        .parse()
        .map_err(|_| format!("timestamp {ts_col:?} is not an integer"))?;
    if timestamp < 0 {
        return Err(format!("timestamp {timestamp} is negative"));
    }
    Ok(Some(RawEdgeRecord {
        src: cols[0].to_string(),
        dst: cols[1].to_string(),
        timestamp,
    }))
}

/// Parses an edge list; malformed lines are collected, not fatal.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<ParsedEdges> {
    let mut out = ParsedEdges::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        match parse_line(&line) {
            Ok(Some(rec)) => out.records.push(rec),
            Ok(None) => {
                if !line.trim().is_empty() {
                    out.comments += 1;
                }
            }
            Err(reason) => out.malformed.push(MalformedLine {
                line_number: i + 1,
                content: line,
                reason,
            }),
        }
    }
    if out.records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

/// UTC offset applied to raw timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TzOffset {
    /// One offset in minutes all year round.
    Fixed(i32),
    /// `(effective_from_utc_seconds, offset_minutes)` pairs; the entry with
    /// the latest start not after the timestamp applies, and the first
    /// entry also applies before its start.
    Schedule(Vec<(i64, i32)>),
}

impl Default for TzOffset {
    fn default() -> Self {
        TzOffset::Fixed(0)
    }
}

impl TzOffset {
    pub fn offset_seconds(&self, utc: i64) -> i64 {
        match self {
            TzOffset::Fixed(m) => *m as i64 * 60,
            TzOffset::Schedule(entries) => {
                let i = entries.partition_point(|(from, _)| *from <= utc);
                let idx = i.saturating_sub(1);
                entries.get(idx).map(|(_, m)| *m as i64 * 60).unwrap_or(0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TzOffset::Schedule(entries) = self {
            if entries.is_empty() || entries.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Config(
                    "offset schedule must be nonempty and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Event times in days on the local clock, measured from `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub times: EventTimes,
    /// Local epoch seconds (UTC seconds plus the offset) of time zero.
    pub origin: i64,
}

impl EventStream {
    pub fn new(times: EventTimes, origin: i64) -> Self {
        Self { times, origin }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Local epoch seconds of a time in days from the origin. Values within
    /// a microsecond of a whole second are snapped to it so that integer
    /// input timestamps land exactly on calendar boundaries.
    pub fn local_seconds(&self, t: f64) -> f64 {
        let s = self.origin as f64 + t * SECONDS_PER_DAY;
        let r = s.round();
        if (s - r).abs() < 1e-6 {
            r
        } else {
            s
        }
    }

    /// `(local day number since the epoch, hour of day in [0, 24))`.
    pub fn day_and_hour(&self, t: f64) -> (i64, f64) {
        let s = self.local_seconds(t);
        let day = (s / SECONDS_PER_DAY).floor();
        let hour = ((s - day * SECONDS_PER_DAY) / 3600.0).clamp(0.0, 24.0 - 1e-12);
        (day as i64, hour)
    }

    pub fn local_date(&self, t: f64) -> NaiveDate {
        date_of_day(self.day_and_hour(t).0)
    }

    pub fn local_datetime(&self, t: f64) -> NaiveDateTime {
        let s = self.local_seconds(t);
        let secs = s.floor() as i64;
        let nanos = ((s - s.floor()) * 1e9) as u32;
        DateTime::from_timestamp(secs, nanos.min(999_999_999))
            .map(|d| d.naive_utc())
            .unwrap_or_default()
    }

    /// Time in days from the origin of local midnight starting `date`.
    pub fn time_of_date(&self, date: NaiveDate) -> f64 {
        let secs = day_number(date) * 86_400;
        (secs - self.origin) as f64 / SECONDS_PER_DAY
    }
}

pub fn date_of_day(day: i64) -> NaiveDate {
    DateTime::from_timestamp(day * 86_400, 0)
        .map(|d| d.date_naive())
        .unwrap_or_default()
}

pub fn day_number(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
        .div_euclid(86_400)
}

/// Converts records to local-clock days, sorted stably by timestamp and
/// re-based so the first event is at time zero.
pub fn to_event_times(records: &[RawEdgeRecord], offset: &TzOffset) -> Result<EventStream> {
    offset.validate()?;
    let mut local: Vec<i64> = records
        .iter()
        .map(|r| r.timestamp + offset.offset_seconds(r.timestamp))
        .collect();
    local.sort();
    let origin = local.first().copied().unwrap_or(0);
    let times = local
        .iter()
        .map(|&s| (s - origin) as f64 / SECONDS_PER_DAY)
        .collect();
    Ok(EventStream::new(EventTimes::new(times)?, origin))
}

/// Adds seeded uniform sub-second jitter in `[0, 1)` s and re-sorts.
pub fn with_subsecond_jitter(stream: &EventStream, seed: u64) -> Result<EventStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = stream
        .times
        .iter()
        .map(|t| t + rng.random::<f64>() / SECONDS_PER_DAY)
        .collect();
    Ok(EventStream::new(
        EventTimes::from_unsorted(times)?,
        stream.origin,
    ))
}

/// Three-column edge list for a stream, with synthetic node ids and
/// timestamps rounded to the second and shifted back to UTC.
pub fn write_edge_list<W: Write>(
    stream: &EventStream,
    offset_minutes: i32,
    mut out: W,
) -> Result<()> {
    writeln!(out, "% sym unweighted")?;
    writeln!(out, "% {} events", stream.len())?;
    for (i, t) in stream.times.iter().enumerate() {
        let utc = stream.local_seconds(t).round() as i64 - offset_minutes as i64 * 60;
        let src = i % 1000;
        let dst = (i * 7 + 1) % 1000;
        writeln!(out, "{src} {dst} {utc}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    /// Times re-based so the first event of the window is at zero.
    pub times: EventTimes,
    /// Absolute span (days from the stream origin) of the window's events.
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn span_days(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    /// Events in the trailing partial window.
    pub discarded: usize,
}

/// Consecutive disjoint windows of exactly `per_window` events.
pub fn windows_by_count(times: &EventTimes, per_window: usize) -> Result<WindowSet> {
    if per_window == 0 {
        return Err(Error::Config("events per window must be > 0".into()));
    }
    let ts = times.as_slice();
    let windows: Vec<Window> = ts
        .chunks_exact(per_window)
        .enumerate()
        .map(|(index, chunk)| {
            let start = chunk[0];
            Window {
                index,
                times: EventTimes::new(chunk.iter().map(|t| t - start).collect())
                    .expect("sorted chunk"),
                start,
                end: chunk[chunk.len() - 1],
            }
        })
        .collect();
    let discarded = ts.len() % per_window;
    if windows.is_empty() {
        log::warn!(
            "{} events are fewer than one window of {per_window}",
            ts.len()
        );
    } else if discarded > 0 {
        log::info!("{discarded} trailing events do not fill a window and are dropped");
    }
    Ok(WindowSet { windows, discarded })
}

/// Events whose local calendar date lies in `[from, to)`; times keep the
/// original origin.
pub fn restrict_period(
    stream: &EventStream,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<EventStream> {
    if let (Some(a), Some(b)) = (from, to) {
        if b < a {
            return Err(Error::Config(format!("period end {b} precedes start {a}")));
        }
    }
    let kept: Vec<f64> = stream
        .times
        .iter()
        .filter(|&t| {
            let d = stream.local_date(t);
            from.is_none_or(|a| d >= a) && to.is_none_or(|b| d < b)
        })
        .collect();
    if kept.is_empty() {
        log::warn!("no events fall in the period {from:?}..{to:?}");
    }
    Ok(EventStream::new(EventTimes::new(kept)?, stream.origin))
}
