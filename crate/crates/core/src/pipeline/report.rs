//! Tab-separated report tables and the run manifest.
//!
//! Every run writes every table; tables without data hold only the header
//! row. Files are staged in a hidden directory and moved into place once
//! all of them were written.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{iso_weekday, AnalysisConfig, Command, RunResults};
use crate::error::{Error, Result};
use crate::gof::KsResult;
use crate::ingest::EventStream;

pub const REPORT_FILES: [&str; 8] = [
    "windows.tsv",
    "window_acceptance.tsv",
    "daily.tsv",
    "daily_acceptance.tsv",
    "weekly.tsv",
    "burstiness.tsv",
    "cumulative.tsv",
    "manifest.json",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

fn local_time(stream: &EventStream, t: f64) -> String {
    stream
        .local_datetime(t)
        .format("%Y-%m-%dT%H:%M:%S")
        .to_string()
}

fn accept_headers(alphas: &[f64]) -> Vec<String> {
    alphas.iter().map(|a| format!("accept_{a}")).collect()
}

fn accept_cells(ks: Option<&KsResult>, alphas: &[f64]) -> Vec<String> {
    alphas
        .iter()
        .map(|&a| ks.map(|k| flag(k.accepts(a))).unwrap_or_default())
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().delimiter(b'\t').from_path(path)?)
}

fn write_table(
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn write_windows(dir: &Path, res: &RunResults, cfg: &AnalysisConfig) -> Result<()> {
    let mut header = strings(&[
        "window",
        "n_events",
        "start_days",
        "end_days",
        "start_local",
        "end_local",
        "span_days",
        "eta_per_day",
        "eta_per_hour",
        "k_hat",
        "kernel",
        "kernel_param",
        "inar_rss",
        "kernel_rss",
        "zero_share",
        "ks_statistic",
        "ks_p_value",
    ]);
    header.extend(accept_headers(&cfg.alphas));
    header.extend(strings(&[
        "k_negative",
        "k_ge_one",
        "solver_failed",
        "singular_design",
        "zero_heavy",
        "low_signal",
        "kernel_fit_skipped",
        "kernel_at_bound",
        "breaks_model",
        "error",
    ]));
    let windows = res
        .startup
        .as_ref()
        .map(|s| s.windows.as_slice())
        .unwrap_or(&[]);
    let rows = windows.iter().map(|w| {
        let e = w.estimate.as_ref();
        let kf = e.and_then(|e| e.kernel_fit.as_ref());
        let mut r = vec![
            w.index.to_string(),
            w.n_events.to_string(),
            num(w.start),
            num(w.end),
            local_time(&res.stream, w.start),
            local_time(&res.stream, w.end),
            num(w.end - w.start),
            opt(e.map(|e| e.eta_hat)),
            opt(e.map(|e| e.eta_hat / 24.0)),
            opt(e.map(|e| e.k_hat)),
            kf.map(|k| k.kernel.family().name().to_string())
                .unwrap_or_default(),
            opt(kf.map(|k| k.kernel.param())),
            opt(e.map(|e| e.inar_rss)),
            opt(kf.map(|k| k.rss)),
            opt(e.map(|e| e.zero_share)),
            opt(w.ks.as_ref().map(|k| k.statistic)),
            opt(w.ks.as_ref().map(|k| k.p_value)),
        ];
        r.extend(accept_cells(w.ks.as_ref(), &cfg.alphas));
        let f = e.map(|e| e.flags).unwrap_or_default();
        for b in [
            f.k_negative,
            f.k_ge_one,
            f.solver_failed,
            f.singular_design,
            f.zero_heavy,
            f.low_signal,
            f.kernel_fit_skipped,
            f.kernel_at_bound,
            w.breaks_model(),
        ] {
            r.push(flag(b));
        }
        r.push(w.error.clone().unwrap_or_default());
        r
    });
    write_table(&dir.join("windows.tsv"), header, rows)
}

fn write_window_acceptance(dir: &Path, res: &RunResults) -> Result<()> {
    let header = strings(&["alpha", "accepted", "tested", "fraction"]);
    let rows = res
        .startup
        .iter()
        .filter(|s| !s.windows.is_empty())
        .flat_map(|s| s.acceptance.iter())
        .map(|a| {
            vec![
                num(a.alpha),
                a.accepted.to_string(),
                a.total.to_string(),
                opt(a.fraction),
            ]
        });
    write_table(&dir.join("window_acceptance.tsv"), header, rows)
}

fn write_daily(dir: &Path, res: &RunResults, cfg: &AnalysisConfig) -> Result<()> {
    let mut header = strings(&[
        "day_index",
        "date",
        "weekday",
        "n_events",
        "active_hours",
        "rate_per_hour",
        "rate_per_day",
        "ks_statistic",
        "ks_p_value",
    ]);
    header.extend(accept_headers(&cfg.alphas));
    header.push("ks_skipped".into());
    let days = res.daily.as_ref().map(|d| d.days.as_slice()).unwrap_or(&[]);
    let rows = days.iter().map(|d| {
        let mut r = vec![
            d.day_index.to_string(),
            d.date.to_string(),
            iso_weekday(d.date).to_string(),
            d.n_events.to_string(),
            num(d.active_hours),
            num(d.rate_per_hour),
            num(d.rate_per_day),
            opt(d.ks.as_ref().map(|k| k.statistic)),
            opt(d.ks.as_ref().map(|k| k.p_value)),
        ];
        r.extend(accept_cells(d.ks.as_ref(), &cfg.alphas));
        r.push(d.ks_skip_reason.clone().unwrap_or_default());
        r
    });
    write_table(&dir.join("daily.tsv"), header, rows)
}

fn write_daily_acceptance(dir: &Path, res: &RunResults) -> Result<()> {
    let header = strings(&[
        "year",
        "alpha",
        "accepted",
        "tested",
        "fraction",
        "n_days",
        "n_skipped",
    ]);
    let rows = res
        .daily
        .iter()
        .flat_map(|d| d.yearly.iter())
        .flat_map(|y| {
            y.rows.iter().map(move |a| {
                vec![
                    y.year.to_string(),
                    num(a.alpha),
                    a.accepted.to_string(),
                    a.total.to_string(),
                    opt(a.fraction),
                    y.n_days.to_string(),
                    y.n_skipped.to_string(),
                ]
            })
        });
    write_table(&dir.join("daily_acceptance.tsv"), header, rows)
}

fn write_weekly(dir: &Path, res: &RunResults) -> Result<()> {
    let header = strings(&[
        "weekday",
        "n_days",
        "mean_rate_per_hour",
        "mean_rate_per_day",
    ]);
    let rows = res
        .daily
        .iter()
        .flat_map(|d| d.weekly.iter().flatten())
        .map(|w| {
            vec![
                w.weekday.to_string(),
                w.n_days.to_string(),
                opt(w.mean_rate_per_hour),
                opt(w.mean_rate_per_day),
            ]
        });
    write_table(&dir.join("weekly.tsv"), header, rows)
}

fn write_burstiness(dir: &Path, res: &RunResults) -> Result<()> {
    let header = strings(&[
        "period",
        "b_all",
        "b_active",
        "n_iets_all",
        "n_iets_active",
        "error",
    ]);
    let rows = res.daily.iter().flat_map(|d| d.burstiness.iter()).map(|b| {
        let r = b.result.as_ref();
        vec![
            b.period.clone(),
            opt(r.map(|r| r.b_all)),
            opt(r.map(|r| r.b_active)),
            r.map(|r| r.n_iets_all.to_string()).unwrap_or_default(),
            r.map(|r| r.n_iets_active.to_string()).unwrap_or_default(),
            b.error.clone().unwrap_or_default(),
        ]
    });
    write_table(&dir.join("burstiness.tsv"), header, rows)
}

fn write_cumulative(dir: &Path, res: &RunResults, cfg: &AnalysisConfig) -> Result<()> {
    let header = strings(&["t_days", "local_time", "cumulative", "phase", "hours"]);
    let policy = cfg.policy();
    let daily_start = res.daily_start_time();
    let stream = &res.stream;
    let rows = stream.times.iter().enumerate().map(|(i, t)| {
        let phase = match (res.command, daily_start) {
            (Command::Startup, _) => "startup",
            (_, Some(d)) if t >= d => "daily",
            (Command::Daily, _) => "daily",
            _ => "startup",
        };
        let (_, hour) = stream.day_and_hour(t);
        let hours = if policy.is_inactive(hour) {
            "inactive"
        } else {
            "active"
        };
        vec![
            num(t),
            local_time(stream, t),
            (i + 1).to_string(),
            phase.into(),
            hours.into(),
        ]
    });
    write_table(&dir.join("cumulative.tsv"), header, rows)
}

fn summary(res: &RunResults) -> serde_json::Value {
    let startup = res.startup.as_ref().map(|s| {
        json!({
            "windows": s.windows.len(),
            "failed_windows": s.n_failed(),
            "discarded_events": s.discarded_events,
            "acceptance": s.acceptance,
        })
    });
    let breakdown = res.breakdown.as_ref().map(|b| {
        let start = b
            .first_flagged_window
            .and_then(|i| res.startup.as_ref().map(|s| s.windows[i].start));
        json!({
            "first_flagged_window": b.first_flagged_window,
            "run_length": b.run_length,
            "flagged_windows": b.flags.iter().filter(|f| **f).count(),
            "window_start_local": start.map(|t| local_time(&res.stream, t)),
        })
    });
    let daily = res.daily.as_ref().map(|d| {
        json!({
            "from": res.daily_from,
            "days": d.days.len(),
            "tested_days": d.days.iter().filter(|x| x.ks_tested()).count(),
            "yearly": d.yearly,
            "weekly_error": d.weekly_error,
        })
    });
    json!({
        "records": res.n_records,
        "malformed_lines": res.n_malformed,
        "events": res.stream.len(),
        "first_event_local": res.stream.times.first().map(|t| local_time(&res.stream, t)),
        "last_event_local": res.stream.times.last().map(|t| local_time(&res.stream, t)),
        "startup": startup,
        "breakdown": breakdown,
        "daily": daily,
    })
}

fn write_manifest(dir: &Path, res: &RunResults, cfg: &AnalysisConfig) -> Result<()> {
    let doc = json!({
        "tool": "netgrowth",
        "version": env!("CARGO_PKG_VERSION"),
        "command": res.command.name(),
        "generated_at": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        "seed": cfg.seed,
        "config": cfg,
        "files": &REPORT_FILES[..REPORT_FILES.len() - 1],
        "summary": summary(res),
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn write_all(dir: &Path, res: &RunResults, cfg: &AnalysisConfig) -> Result<()> {
    write_windows(dir, res, cfg)?;
    write_window_acceptance(dir, res)?;
    write_daily(dir, res, cfg)?;
    write_daily_acceptance(dir, res)?;
    write_weekly(dir, res)?;
    write_burstiness(dir, res)?;
    write_cumulative(dir, res, cfg)?;
    write_manifest(dir, res, cfg)
}

/// Writes all report files into `out_dir`; returns their paths. On error
/// no partial output is left behind.
pub fn emit_reports(
    res: &RunResults,
    cfg: &AnalysisConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let staging = out_dir.join(format!(".staging-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    if let Err(e) = write_all(&staging, res, cfg) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    let mut moved = Vec::new();
    for name in REPORT_FILES {
        let dst = out_dir.join(name);
        if let Err(e) = fs::rename(staging.join(name), &dst) {
            for p in &moved {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_dir_all(&staging);
            return Err(e.into());
        }
        moved.push(dst);
    }
    fs::remove_dir(&staging)?;
    Ok(moved)
}
