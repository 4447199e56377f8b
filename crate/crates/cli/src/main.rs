use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use netgrowth::ingest::{day_number, write_edge_list, EventStream, TzOffset};
use netgrowth::pipeline::{self, parse_inactive, AnalysisConfig, Command};
use netgrowth::simulate::{simulate_sepp, simulate_three_phase, SimStop, ThreePhaseConfig};
use netgrowth::{Error, KernelFamily, SeppParams};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "netgrowth",
    version,
    about = "Point-process analysis of timestamped edge lists"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the self-exciting model window by window and test each fit.
    Startup(AnalysisArgs),
    /// Estimate daily Poisson rates outside the inactive hours.
    Daily(AnalysisArgs),
    /// Startup analysis, breakdown detection, then daily analysis.
    Full(AnalysisArgs),
    /// Write a synthetic edge list.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Exp,
    Powerlaw,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Exp => KernelFamily::Exponential,
            KernelArg::Powerlaw => KernelFamily::PowerLaw,
        }
    }
}

#[derive(Args)]
struct AnalysisArgs {
    /// Edge list: `src dst [weight] unix_seconds` per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for the report tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with analysis settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Offset of local time from UTC in minutes (for example -360).
    #[arg(long, allow_hyphen_values = true)]
    tz_offset_min: Option<i32>,
    /// First local date analysed (inclusive), YYYY-MM-DD.
    #[arg(long)]
    from: Option<NaiveDate>,
    /// End local date (exclusive), YYYY-MM-DD.
    #[arg(long)]
    to: Option<NaiveDate>,
    /// Events per startup window.
    #[arg(long)]
    window_size: Option<usize>,
    /// Autoregression order.
    #[arg(long)]
    p: Option<usize>,
    /// Bin width in minutes.
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Inactive local hours as HH-HH, for example 1-8.
    #[arg(long)]
    inactive: Option<String>,
    /// Significance level; repeat for several.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Consecutive flagged windows that mark a breakdown.
    #[arg(long)]
    breakdown_run: Option<usize>,
    /// Break timestamp ties with seeded sub-second jitter.
    #[arg(long)]
    jitter: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl AnalysisArgs {
    fn to_config(&self) -> Result<AnalysisConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => AnalysisConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.tz_offset_min {
            cfg.tz_offset = TzOffset::Fixed(v);
        }
        if self.from.is_some() {
            cfg.from = self.from;
        }
        if self.to.is_some() {
            cfg.to = self.to;
        }
        if let Some(v) = self.window_size {
            cfg.window_size = v;
        }
        if let Some(v) = self.p {
            cfg.inar_p = v;
        }
        if let Some(v) = self.delta_min {
            cfg.inar_delta = v / 1440.0;
        }
        if let Some(v) = self.kernel {
            cfg.kernel = v.into();
        }
        if let Some(v) = &self.inactive {
            cfg.inactive = parse_inactive(v)?;
        }
        if !self.alphas.is_empty() {
            cfg.alphas = self.alphas.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.breakdown_run {
            cfg.breakdown_run = v;
        }
        cfg.jitter |= self.jitter;
        if cfg.input.is_none() {
            return Err(Error::Config("--input is required".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModel {
    /// Stationary self-exciting process.
    Sepp,
    /// Self-exciting startup followed by daily Poisson activity.
    ThreePhase,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "three-phase")]
    model: SimModel,
    /// Output edge-list file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Background rate per day.
    #[arg(long, default_value_t = 20.0)]
    eta: f64,
    /// Branching factor.
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    #[arg(long, value_enum, default_value = "exp")]
    kernel: KernelArg,
    /// Kernel parameter: beta (per day) or gamma.
    #[arg(long, default_value_t = 40.0)]
    kernel_param: f64,
    /// Length of a plain self-exciting run in days.
    #[arg(long, default_value_t = 100.0)]
    days: f64,
    /// Stop a plain self-exciting run after this many events instead.
    #[arg(long)]
    events: Option<usize>,
    #[arg(long, default_value_t = 60.0)]
    startup_days: f64,
    /// Number of Poisson days after the startup.
    #[arg(long, default_value_t = 300)]
    daily_days: usize,
    /// Comma-separated active-hours rates (events per day), cycled over
    /// the Poisson days.
    #[arg(long, default_value = "420,420,420,420,420,320,320")]
    daily_rates: String,
    #[arg(long, default_value = "1-8")]
    inactive: String,
    /// Local date at time zero.
    #[arg(long, default_value = "2005-01-01")]
    start_date: NaiveDate,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    tz_offset_min: i32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn simulate(args: &SimulateArgs) -> Result<usize, Error> {
    let kernel = KernelFamily::from(args.kernel).with_param(args.kernel_param);
    let params = SeppParams::new(args.eta, args.k, kernel);
    let times = match args.model {
        SimModel::Sepp => {
            let stop = match args.events {
                Some(n) => SimStop::Count(n),
                None => SimStop::Horizon(args.days),
            };
            simulate_sepp(&params, stop, args.seed)?
        }
        SimModel::ThreePhase => {
            let cycle: Vec<f64> = args
                .daily_rates
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad --daily-rates {:?}", args.daily_rates)))?;
            if cycle.is_empty() {
                return Err(Error::Config("--daily-rates is empty".into()));
            }
            let cfg = ThreePhaseConfig {
                startup: params,
                startup_days: args.startup_days,
                daily_rates: (0..args.daily_days)
                    .map(|i| cycle[i % cycle.len()])
                    .collect(),
                inactive_window: parse_inactive(&args.inactive)?,
                seed: args.seed,
            };
            simulate_three_phase(&cfg)?
        }
    };
    let n = times.len();
    let stream = EventStream::new(times, day_number(args.start_date) * 86_400);
    match &args.out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_edge_list(&stream, args.tz_offset_min, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_edge_list(&stream, args.tz_offset_min, &mut w)?;
            w.flush()?;
        }
    }
    Ok(n)
}

fn analyse(command: Command, args: &AnalysisArgs) -> Result<(), Error> {
    let cfg = args.to_config()?;
    let res = pipeline::run(command, &cfg, args.threads)?;
    if let Some(s) = &res.startup {
        for row in &s.acceptance {
            println!(
                "windows accepted at alpha={}: {}/{}",
                row.alpha, row.accepted, row.total
            );
        }
    }
    if let Some(b) = &res.breakdown {
        match b.first_flagged_window {
            Some(i) => println!("breakdown at window {i}"),
            None => println!("no breakdown detected"),
        }
    }
    if let Some(d) = &res.daily {
        for y in &d.yearly {
            for row in &y.rows {
                println!(
                    "{} days accepted at alpha={}: {}/{} ({} skipped)",
                    y.year, row.alpha, row.accepted, row.total, y.n_skipped
                );
            }
        }
    }
    println!("reports written to {}", cfg.out_dir.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ParameterDomain(_) => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Startup(a) => analyse(Command::Startup, a),
        Cmd::Daily(a) => analyse(Command::Daily, a),
        Cmd::Full(a) => analyse(Command::Full, a),
        Cmd::Simulate(a) => simulate(a).map(|n| log::info!("{n} events written")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
