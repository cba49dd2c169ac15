//! The `flatspot` command line.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error,
//! 3 capacity error. Failures print a one-line JSON object on stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::density::{self, assemble_capped, format_f64_17, DensityError, DEFAULT_MAX_Q};
use crate::dynamics::{limit_deviation, locate, DynamicsError, FlatSpotMap};
use crate::exact::{farey_enumerate, interval_i, t_of, upper_string, ExactError, RotationFraction};
use crate::montecarlo::{self, compare, ComparisonReport, MonteCarloError, SimulationConfig};
use crate::plot::step_function_svg;
use crate::qgaussian::{self, FitOptions, QGaussianError, QGaussianParams};
use crate::rational::Rational;
use crate::verify::{Suite, SuiteReport};

/// Environment variable that caps every `--max-q`.
pub const MAX_Q_ENV: &str = "FLATSPOT_MAX_Q";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("--max-q {requested} exceeds the capacity limit {limit}")]
    Capacity { requested: u32, limit: u32 },
    #[error("verification failed: {}", failed_names(.0))]
    Verification(Vec<SuiteReport>),
    #[error("{0}")]
    Runtime(String),
    /// The reader of stdout went away, e.g. `flatspot table | head`.
    #[error("output closed")]
    Closed,
}

fn failed_names(reports: &[SuiteReport]) -> String {
    reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.suite.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Closed => 0,
            CliError::Verification(_) | CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Capacity { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Capacity { .. } => "capacity",
            CliError::Verification(_) => "verification",
            CliError::Runtime(_) => "runtime",
            CliError::Closed => "closed",
        }
    }

    /// The machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Verification(reports) = self {
            v["failures"] = json!(reports.iter().filter(|r| !r.passed()).collect::<Vec<_>>());
        }
        v
    }
}

/// `Runtime`, or `Closed` when an I/O error in the source chain is a broken pipe.
fn runtime(e: &(dyn std::error::Error + 'static)) -> CliError {
    let mut cause = Some(e);
    while let Some(c) = cause {
        let kind = if let Some(io) = c.downcast_ref::<io::Error>() {
            Some(io.kind())
        } else if let Some(json) = c.downcast_ref::<serde_json::Error>() {
            json.io_error_kind()
        } else if let Some(csv::ErrorKind::Io(io)) =
            c.downcast_ref::<csv::Error>().map(csv::Error::kind)
        {
            Some(io.kind())
        } else {
            None
        };
        if kind == Some(io::ErrorKind::BrokenPipe) {
            return CliError::Closed;
        }
        cause = c.source();
    }
    CliError::Runtime(e.to_string())
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        runtime(&e)
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DensityError> for CliError {
    fn from(e: DensityError) -> Self {
        match e {
            DensityError::Capacity { requested, limit } => CliError::Capacity { requested, limit },
            DensityError::TooSmall { .. } | DensityError::Exact(_) => {
                CliError::Usage(e.to_string())
            }
            DensityError::Io(io) => runtime(&io),
            other => runtime(&other),
        }
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::Config(_) => CliError::Usage(e.to_string()),
            MonteCarloError::Io(io) => runtime(&io),
            other => runtime(&other),
        }
    }
}

impl From<QGaussianError> for CliError {
    fn from(e: QGaussianError) -> Self {
        match e {
            QGaussianError::NotConverged { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        runtime(&e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        runtime(&e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flatspot",
    version,
    about = "Exact limit densities of S_n/n for the flat-spot doubling maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, clap::Args)]
pub struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rows p/q, s+, t_p/q, I_p/q, J_p/q for every q <= max-q.
    Table {
        #[arg(long, default_value_t = 5)]
        max_q: u32,
        #[command(flatten)]
        out: Output,
    },
    /// The step function nu_N (csv, json, or svg).
    Density {
        #[arg(long, default_value_t = 50)]
        max_q: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Evaluate nu_N at one point, exactly.
    Eval {
        /// A rational such as 0, -3/8 or 0.125.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value_t = 50)]
        max_q: u32,
    },
    /// The bound 4(N+2)/(2^(N+1)-1) on sup |nu - nu_N|.
    ErrorBound {
        #[arg(long, default_value_t = 50)]
        max_q: u32,
    },
    /// One density component nu_p/q.
    Component {
        /// Rotation number p/q.
        #[arg(long)]
        r: String,
    },
    /// Exact orbit statistics of f_t from x0.
    Orbit {
        #[arg(long)]
        t: String,
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
    },
    /// The limit of S_n/n for t in I_p/q.
    Limit {
        #[arg(long)]
        r: String,
        #[arg(long)]
        t: String,
    },
    /// Find the p/q interval containing t.
    Locate {
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 20)]
        max_q: u32,
    },
    /// Monte Carlo histogram of S_n/n compared with nu_N.
    Simulate {
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
        #[arg(long, default_value_t = 400)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        max_q: u32,
        #[arg(long, default_value_t = montecarlo::DEFAULT_ENTRY_CAP)]
        entry_cap: u64,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the comparison report (JSON) here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Ratio of a Q-Gaussian left tail to nu near -1/2, at z = 1/q.
    Tail {
        #[arg(long, default_value_t = 8)]
        q_from: u32,
        #[arg(long, default_value_t = 20)]
        q_to: u32,
        #[arg(long = "Q", default_value_t = 0.7)]
        q_param: f64,
        #[arg(long, default_value_t = 16.1)]
        beta: f64,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 50)]
        max_q: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Fit C e_Q(-beta y^2) to nu_N.
    Fit {
        #[arg(long, default_value_t = 50)]
        max_q: u32,
        /// Plateaus below this value are not fitted.
        #[arg(long, default_value_t = 1e-4)]
        floor: f64,
    },
    /// Run an invariant suite (or "all"); exits 1 on any violation.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

/// The `--max-q` ceiling: `FLATSPOT_MAX_Q` if set, else the default.
pub fn max_q_limit() -> Result<u32, CliError> {
    match std::env::var(MAX_Q_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{MAX_Q_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_MAX_Q),
    }
}

fn check_max_q(requested: u32, limit: u32) -> Result<u32, CliError> {
    if requested > limit {
        return Err(CliError::Capacity { requested, limit });
    }
    if requested < 2 {
        return Err(CliError::Usage(format!(
            "--max-q must be at least 2, got {requested}"
        )));
    }
    Ok(requested)
}

fn parse_rational(flag: &str, s: &str) -> Result<Rational, CliError> {
    s.parse()
        .map_err(|e| CliError::Usage(format!("--{flag} {s:?}: {e}")))
}

fn open_output<'a>(
    path: &Option<PathBuf>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

/// One line of the rotation-number table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub fraction: RotationFraction,
    pub s_plus: String,
    pub t: Rational,
    pub i_left: Rational,
    pub i_right: Rational,
    pub j_left: Rational,
    pub j_right: Rational,
}

impl TableRow {
    pub fn compute(r: RotationFraction) -> Self {
        let i = interval_i(r);
        let j = density::component(r).support;
        TableRow {
            fraction: r,
            s_plus: upper_string(r).to_string(),
            t: t_of(r),
            i_left: i.lo,
            i_right: i.hi,
            j_left: j.lo,
            j_right: j.hi,
        }
    }
}

pub fn table_rows(max_q: u32) -> Result<Vec<TableRow>, CliError> {
    Ok(farey_enumerate(max_q)?
        .into_iter()
        .map(TableRow::compute)
        .collect())
}

/// Runs one parsed command, writing its normal output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let limit = max_q_limit()?;
    match cli.command {
        Command::Table { max_q, out } => {
            let rows = table_rows(check_max_q(max_q, limit)?)?;
            let mut w = open_output(&out.output, stdout)?;
            match out.format {
                Format::Csv => {
                    let mut csv = csv::Writer::from_writer(&mut w);
                    for row in &rows {
                        csv.serialize(row)?;
                    }
                    csv.flush()?;
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &rows)?;
                    writeln!(w)?;
                }
                Format::Svg => return Err(CliError::Usage("table has no svg form".into())),
            }
            w.flush()?;
        }
        Command::Density { max_q, out } => {
            let n = check_max_q(max_q, limit)?;
            let nu = assemble_capped(n, limit)?;
            let mut w = open_output(&out.output, stdout)?;
            match out.format {
                Format::Csv => nu.write_csv(&mut w)?,
                Format::Json => {
                    nu.write_json(&mut w)?;
                    writeln!(w)?;
                }
                Format::Svg => {
                    w.write_all(step_function_svg(&nu, &format!("nu_{n}")).as_bytes())?
                }
            }
            w.flush()?;
        }
        Command::Eval { x, max_q } => {
            let x = parse_rational("x", &x)?;
            let nu = assemble_capped(check_max_q(max_q, limit)?, limit)?;
            let v = nu.evaluate(&x);
            writeln!(stdout, "{v} {}", format_f64_17(v.to_f64()))?;
        }
        Command::ErrorBound { max_q } => {
            let b = density::error_bound(check_max_q(max_q, limit)?);
            writeln!(stdout, "{b} {}", format_f64_17(b.to_f64()))?;
        }
        Command::Component { r } => {
            let r: RotationFraction = r.parse()?;
            let c = density::component(r);
            serde_json::to_writer_pretty(&mut *stdout, &c)?;
            writeln!(stdout)?;
        }
        Command::Orbit { t, x0, n, cap } => {
            let map = FlatSpotMap::new(parse_rational("t", &t)?)?;
            let x0 = parse_rational("x0", &x0)?;
            let entry_time = map.entry_time(&x0, cap)?;
            let period = entry_time.and_then(|_| map.return_time(cap));
            let sum = map.deviation_sum_fast(&x0, n, cap)?;
            let mean = &sum / &Rational::from_integer(n);
            let report = json!({
                "t": map.t(),
                "x0": x0,
                "n": n,
                "entry_time": entry_time,
                "period": period,
                "S_n": sum,
                "S_n_over_n": mean,
                "S_n_over_n_float": format_f64_17(mean.to_f64()),
            });
            serde_json::to_writer_pretty(&mut *stdout, &report)?;
            writeln!(stdout)?;
        }
        Command::Limit { r, t } => {
            let r: RotationFraction = r.parse()?;
            let v = limit_deviation(r, &parse_rational("t", &t)?)?;
            writeln!(stdout, "{v} {}", format_f64_17(v.to_f64()))?;
        }
        Command::Locate { t, max_q } => {
            let t = parse_rational("t", &t)?;
            match locate(&t, check_max_q(max_q, limit)?)? {
                Some(r) => writeln!(stdout, "{r} {}", interval_i(r))?,
                None => writeln!(stdout, "not found")?,
            }
        }
        Command::Simulate {
            samples,
            iters,
            bins,
            seed,
            max_q,
            entry_cap,
            threads,
            report,
            out,
        } => {
            let nu = assemble_capped(check_max_q(max_q, limit)?, limit)?;
            let config = SimulationConfig {
                samples,
                iterations: iters,
                entry_cap,
                bins,
                seed,
            };
            let hist = match threads {
                Some(k) if k > 0 => montecarlo::run_with_threads(&config, k)?,
                Some(_) => return Err(CliError::Usage("--threads must be positive".into())),
                None => montecarlo::run(&config)?,
            };
            let summary = ComparisonReport {
                comparison: compare(&hist, &nu),
                samples,
                n: iters,
                bins,
                seed,
            };
            if let Some(path) = report {
                let mut f = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut f, &summary)?;
                writeln!(f)?;
                f.flush()?;
            }
            let mut w = open_output(&out.output, stdout)?;
            match out.format {
                Format::Csv => hist.write_csv(&nu, &mut w)?,
                Format::Json => {
                    let value = json!({ "report": summary, "histogram": hist });
                    serde_json::to_writer_pretty(&mut w, &value)?;
                    writeln!(w)?;
                }
                Format::Svg => return Err(CliError::Usage("simulate has no svg form".into())),
            }
            w.flush()?;
        }
        Command::Tail {
            q_from,
            q_to,
            q_param,
            beta,
            c,
            max_q,
            out,
        } => {
            if q_from == 0 || q_from > q_to {
                return Err(CliError::Usage(format!("bad q range {q_from}..={q_to}")));
            }
            let params = QGaussianParams::new(q_param, beta, c, 0.0)?;
            let n = check_max_q(max_q, limit)?;
            let nu = assemble_capped(n, limit)?;
            let probes = qgaussian::tail_ratio_series(&params, &nu, n, q_from..=q_to)?;
            let mut w = open_output(&out.output, stdout)?;
            match out.format {
                Format::Csv => {
                    let mut csv = csv::Writer::from_writer(&mut w);
                    csv.write_record(["q", "z", "qgaussian", "nu_exact", "nu", "ratio"])?;
                    for p in &probes {
                        csv.write_record([
                            p.q.to_string(),
                            format_f64_17(p.z),
                            format_f64_17(p.qgaussian),
                            p.nu_exact.to_string(),
                            format_f64_17(p.nu),
                            format_f64_17(p.ratio),
                        ])?;
                    }
                    csv.flush()?;
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &probes)?;
                    writeln!(w)?;
                }
                Format::Svg => return Err(CliError::Usage("tail has no svg form".into())),
            }
            w.flush()?;
        }
        Command::Fit { max_q, floor } => {
            let nu = assemble_capped(check_max_q(max_q, limit)?, limit)?;
            let options = FitOptions {
                floor,
                ..FitOptions::default()
            };
            let result = qgaussian::fit(&nu, &options)?;
            serde_json::to_writer_pretty(&mut *stdout, &result)?;
            writeln!(stdout)?;
        }
        Command::Verify { suite } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse().map_err(CliError::Usage)?]
            };
            let mut reports = Vec::new();
            for s in suites {
                let report = s.run();
                let status = if report.passed() { "PASS" } else { "FAIL" };
                writeln!(
                    stdout,
                    "{status} {} ({} checks)",
                    report.suite, report.checks
                )?;
                reports.push(report);
            }
            if reports.iter().any(|r| !r.passed()) {
                return Err(CliError::Verification(reports));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = writeln!(
                    stderr,
                    "{}",
                    json!({ "error": "usage", "exit_code": 2, "message": e.to_string().trim_end() })
                );
            }
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(()) | Err(CliError::Closed) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
