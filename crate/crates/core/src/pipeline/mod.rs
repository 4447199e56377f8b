//! Batch driver: startup-phase window fits, breakdown detection, daily
//! Poisson analysis and report emission.
//!
//! Windows and days are processed on a rayon pool; results are collected
//! in index order so output never depends on the thread count.

mod breakdown;
mod config;
mod report;

use std::fs::File;
use std::io::BufReader;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use breakdown::{detect_breakdown, BreakdownReport};
pub use config::{parse_inactive, AnalysisConfig, DEFAULT_BREAKDOWN_RUN};
pub use report::{emit_reports, REPORT_FILES};

use crate::error::{Error, Result};
use crate::gof::{acceptance_table, ks_exp_unit, transformed_iets, AcceptanceRow, KsResult};
use crate::inar::{estimate_window, InarConfig, InarEstimate};
use crate::ingest::{
    parse_edge_list, restrict_period, to_event_times, windows_by_count, with_subsecond_jitter,
    EventStream, MalformedLine, Window,
};
use crate::nhpp::{
    burstiness_comparison, filter_active, group_by_year, split_days, weekly_profile,
    BurstinessComparison, DailyRateEstimate, WeekdayRate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Startup,
    Daily,
    Full,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Startup => "startup",
            Command::Daily => "daily",
            Command::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInput {
    pub stream: EventStream,
    pub n_records: usize,
    pub malformed: Vec<MalformedLine>,
}

/// Reads, converts and period-restricts the configured input file.
pub fn load_input(cfg: &AnalysisConfig) -> Result<LoadedInput> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input file configured".into()))?;
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let parsed = parse_edge_list(BufReader::new(file))?;
    if !parsed.malformed.is_empty() {
        log::warn!("{} malformed lines skipped", parsed.malformed.len());
    }
    let stream = prepare_stream(&parsed.records, cfg)?;
    Ok(LoadedInput {
        stream,
        n_records: parsed.records.len(),
        malformed: parsed.malformed,
    })
}

pub fn prepare_stream(
    records: &[crate::ingest::RawEdgeRecord],
    cfg: &AnalysisConfig,
) -> Result<EventStream> {
    let mut stream = to_event_times(records, &cfg.tz_offset)?;
    if cfg.jitter {
        stream = with_subsecond_jitter(&stream, cfg.seed)?;
    }
    restrict_period(&stream, cfg.from, cfg.to)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub index: usize,
    pub n_events: usize,
    /// Absolute span in days from the stream origin.
    pub start: f64,
    pub end: f64,
    pub estimate: Option<InarEstimate>,
    pub ks: Option<KsResult>,
    pub error: Option<String>,
}

impl WindowOutcome {
    /// Negative or explosive branching, a failed solver, or no fit at all.
    pub fn breaks_model(&self) -> bool {
        match &self.estimate {
            Some(e) => e.flags.breaks_model(),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartupResults {
    pub windows: Vec<WindowOutcome>,
    pub acceptance: Vec<AcceptanceRow>,
    pub discarded_events: usize,
}

impl StartupResults {
    pub fn n_failed(&self) -> usize {
        self.windows.iter().filter(|w| w.error.is_some()).count()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.windows
            .iter()
            .map(WindowOutcome::breaks_model)
            .collect()
    }
}

fn analyze_window(w: &Window, inar: &InarConfig, alphas: &[f64]) -> WindowOutcome {
    let mut out = WindowOutcome {
        index: w.index,
        n_events: w.times.len(),
        start: w.start,
        end: w.end,
        estimate: None,
        ks: None,
        error: None,
    };
    match estimate_window(&w.times, inar) {
        Ok(est) => {
            match transformed_iets(&est.params(), &w.times).and_then(|z| ks_exp_unit(&z, alphas)) {
                Ok(ks) => out.ks = Some(ks),
                Err(e) => out.error = Some(format!("rescaling: {e}")),
            }
            out.estimate = Some(est);
        }
        Err(e) => out.error = Some(format!("estimation: {e}")),
    }
    out
}

/// Fits every full window of the stream and tests each fit by time
/// rescaling. Window failures are recorded and never abort the batch.
pub fn run_startup_analysis(cfg: &AnalysisConfig, stream: &EventStream) -> Result<StartupResults> {
    cfg.validate()?;
    let set = windows_by_count(&stream.times, cfg.window_size)?;
    let inar = cfg.inar();
    let windows: Vec<WindowOutcome> = set
        .windows
        .par_iter()
        .map(|w| analyze_window(w, &inar, &cfg.alphas))
        .collect();
    let tests: Vec<KsResult> = windows.iter().filter_map(|w| w.ks.clone()).collect();
    Ok(StartupResults {
        acceptance: acceptance_table(&tests, &cfg.alphas),
        windows,
        discarded_events: set.discarded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearAcceptance {
    pub year: i32,
    pub n_days: usize,
    pub n_tested: usize,
    pub n_skipped: usize,
    pub rows: Vec<AcceptanceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodBurstiness {
    /// A calendar year, or `"all"` for the whole period.
    pub period: String,
    pub result: Option<BurstinessComparison>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyResults {
    pub days: Vec<DailyRateEstimate>,
    pub yearly: Vec<YearAcceptance>,
    pub weekly: Option<Vec<WeekdayRate>>,
    pub weekly_error: Option<String>,
    pub burstiness: Vec<PeriodBurstiness>,
}

fn burstiness_row(period: String, stream: &EventStream, cfg: &AnalysisConfig) -> PeriodBurstiness {
    match burstiness_comparison(stream, &cfg.policy()) {
        Ok(r) => PeriodBurstiness {
            period,
            result: Some(r),
            error: None,
        },
        Err(e) => PeriodBurstiness {
            period,
            result: None,
            error: Some(e.to_string()),
        },
    }
}

/// Daily rates, yearly KS acceptance, weekday profile and yearly
/// burstiness for the whole stream.
pub fn run_daily_analysis(cfg: &AnalysisConfig, stream: &EventStream) -> Result<DailyResults> {
    cfg.validate()?;
    let policy = cfg.policy();
    let active_hours = policy.active_hours();
    let days = split_days(stream, &policy)?;
    let days: Vec<DailyRateEstimate> = days
        .par_iter()
        .map(|d| crate::nhpp::daily_rate(&filter_active(d, &policy), active_hours, &cfg.alphas))
        .collect::<Result<_>>()?;

    let yearly = group_by_year(&days)
        .into_iter()
        .map(|(year, ds)| {
            let tests: Vec<KsResult> = ds.iter().filter_map(|d| d.ks.clone()).collect();
            YearAcceptance {
                year,
                n_days: ds.len(),
                n_tested: tests.len(),
                n_skipped: ds.len() - tests.len(),
                rows: acceptance_table(&tests, &cfg.alphas),
            }
        })
        .collect::<Vec<_>>();

    let (weekly, weekly_error) = match weekly_profile(&days) {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let years: Vec<i32> = yearly.iter().map(|y| y.year).collect();
    let mut burstiness: Vec<PeriodBurstiness> = years
        .par_iter()
        .map(|&y| {
            let from = NaiveDate::from_ymd_opt(y, 1, 1);
            let to = NaiveDate::from_ymd_opt(y + 1, 1, 1);
            match restrict_period(stream, from, to) {
                Ok(s) => burstiness_row(y.to_string(), &s, cfg),
                Err(e) => PeriodBurstiness {
                    period: y.to_string(),
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    burstiness.push(burstiness_row("all".into(), stream, cfg));

    Ok(DailyResults {
        days,
        yearly,
        weekly,
        weekly_error,
        burstiness,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResults {
    pub command: Command,
    pub n_records: usize,
    pub n_malformed: usize,
    /// The analysed stream, after period restriction.
    pub stream: EventStream,
    pub startup: Option<StartupResults>,
    pub breakdown: Option<BreakdownReport>,
    /// First local date of the daily analysis in a full run.
    pub daily_from: Option<NaiveDate>,
    pub daily: Option<DailyResults>,
}

impl RunResults {
    /// Time (days from the origin) where the daily phase starts, if any.
    pub fn daily_start_time(&self) -> Option<f64> {
        match self.command {
            Command::Startup => None,
            Command::Daily => self.stream.times.first(),
            Command::Full => self.daily_from.map(|d| self.stream.time_of_date(d)),
        }
    }
}

/// Runs `command` on an already-loaded stream.
pub fn run_on_stream(
    command: Command,
    cfg: &AnalysisConfig,
    input: LoadedInput,
) -> Result<RunResults> {
    cfg.validate()?;
    let stream = input.stream;
    let mut res = RunResults {
        command,
        n_records: input.n_records,
        n_malformed: input.malformed.len(),
        stream,
        startup: None,
        breakdown: None,
        daily_from: None,
        daily: None,
    };
    match command {
        Command::Startup => {
            res.startup = Some(run_startup_analysis(cfg, &res.stream)?);
        }
        Command::Daily => {
            res.daily = Some(run_daily_analysis(cfg, &res.stream)?);
        }
        Command::Full => {
            let startup = run_startup_analysis(cfg, &res.stream)?;
            let report = detect_breakdown(&startup.flags(), cfg.breakdown_run);
            if let Some(i) = report.first_flagged_window {
                // Daily analysis starts on the first whole day after the
                // breakdown window begins.
                let t = startup.windows[i].start;
                let from = res.stream.local_date(t).succ_opt();
                let daily_stream = restrict_period(&res.stream, from, None)?;
                res.daily_from = from;
                res.daily = Some(run_daily_analysis(cfg, &daily_stream)?);
            } else {
                log::info!("no sustained breakdown found; daily analysis skipped");
            }
            res.startup = Some(startup);
            res.breakdown = Some(report);
        }
    }
    Ok(res)
}

/// Builds a pool with `threads` workers (all cores when `None`).
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be > 0".into()));
        }
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Loads the input, runs `command` on a pool of `threads` workers and
/// writes all reports.
pub fn run(command: Command, cfg: &AnalysisConfig, threads: Option<usize>) -> Result<RunResults> {
    cfg.validate()?;
    let pool = thread_pool(threads)?;
    let input = load_input(cfg)?;
    let res = pool.install(|| run_on_stream(command, cfg, input))?;
    emit_reports(&res, cfg, &cfg.out_dir)?;
    Ok(res)
}

/// Weekday number (1 = Monday) of a date, as written in reports.
pub(crate) fn iso_weekday(d: NaiveDate) -> u32 {
    d.weekday().number_from_monday()
}
