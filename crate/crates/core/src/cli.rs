//! Batch commands: `simulate`, `turing`, and `distance`.
//!
//! Exit codes: 0 success (and Indistinguishable for `turing`), 1
//! Distinguishable, 2 configuration or parse error, 3 numerical failure.
//!
//! `simulate` reads a JSON [`RunConfig`] and writes four reports into the
//! output directory:
//!
//! - `trackrecord.csv`: header `tick,equity,return`, one row per tick of the
//!   top-ranked agent; the return field is empty on tick 0.
//! - `answers.jsonl`: one object per tick of the top-ranked agent with
//!   `tick`, `verdict`, `ci_lo`, `ci_hi` (null for DontKnow), `basis_count`,
//!   `learning_request`, and `realized`.
//! - `turing_report.json`: the top-ranked agent against buy-and-hold on the
//!   same series, with `metrics_a`, `metrics_b`, `rho`, `distance` (`"inf"`
//!   when infinite), `verdict`, `threshold`, `bands`.
//! - `sweep_ranking.csv`: header
//!   `rank,agent,score,sharpe,max_drawdown,var_95,final_equity,trades,store_size`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{sweep, AgentError, AgentParams, SweepEntry, Verdict};
use crate::divergence::{
    bc_discrete, bc_normal_mv, DiscreteDistribution, Divergence, DivergenceError,
};
use crate::evaluation::{
    risk_metrics, turing_test, MetricBands, TrackRecord, TuringReport, TuringVerdict,
    DEFAULT_TURING_THRESHOLD,
};
use crate::jl::{find_map, JlError, DEFAULT_MAX_ATTEMPTS};
use crate::market::{generate_gbm, ingest_csv, GbmParams, MarketError, PriceSeries};
use crate::numerics::{fit_gaussian_summary, Matrix, NumericsError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Numeric(_) | CliError::Io { .. } => 3,
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "curious-trader",
    version,
    about = "Curious and confident trader simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the agent sweep described by a config file and write reports.
    Simulate(SimulateArgs),
    /// Compare two track records.
    Turing(TuringArgs),
    /// Bhattacharyya distance between two numeric datasets.
    Distance(DistanceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the market seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuringArgs {
    /// Track record CSV (`tick,equity,return`).
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TURING_THRESHOLD)]
    pub threshold: f64,
    /// Directory for `turing_report.json`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceMode {
    /// Fit a normal to the projected rows of each dataset.
    Gaussian,
    /// Histogram every value of both datasets on shared bins.
    Histogram,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DistanceMode::Gaussian)]
    pub mode: DistanceMode,
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Distinguishable,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Distinguishable => 1,
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut impl Write) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Simulate(args) => run_simulate(args, stdout),
        Command::Turing(args) => run_turing(args, stdout),
        Command::Distance(args) => run_distance(args, stdout),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MarketSource {
    Gbm(GbmParams),
    /// Relative paths are taken from the config file's directory.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub bands: MetricBands,
}

fn default_threshold() -> f64 {
    DEFAULT_TURING_THRESHOLD
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_TURING_THRESHOLD,
            bands: MetricBands::default(),
        }
    }
}

/// Config for `simulate`.
///
/// ```json
/// {
///   "market": { "gbm": { "s0": 100.0, "mu": 0.0005, "sigma": 0.01, "horizon": 500 } },
///   "agents": [ { "bass": { "p": 0.005, "q": 0.05, "m": 100 }, "seed": 1 } ],
///   "evaluation": { "threshold": 0.05 },
///   "seed": 7,
///   "output_dir": "out"
/// }
/// ```
///
/// `market` may instead be `{ "csv": "prices.csv" }`. Agent fields other
/// than `bass` take their defaults when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketSource,
    pub agents: Vec<AgentParams>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Seed of the generated market.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let MarketSource::Gbm(gbm) = &self.market {
            gbm.validate().map_err(|e| match e {
                MarketError::InvalidParams { field, message } => {
                    CliError::Config(format!("market.gbm.{field}: {message}"))
                }
                other => CliError::Config(other.to_string()),
            })?;
        }
        if self.agents.is_empty() {
            return Err(CliError::Config(
                "agents: need at least one parameter set".into(),
            ));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.validate().map_err(|e| match e {
                AgentError::InvalidParams { field, message } => {
                    CliError::Config(format!("agents[{i}].{field}: {message}"))
                }
                other => CliError::Config(format!("agents[{i}]: {other}")),
            })?;
        }
        let ev = &self.evaluation;
        if !(ev.threshold >= 0.0) {
            return Err(CliError::Config(
                "evaluation.threshold: must be non-negative".into(),
            ));
        }
        for (name, band) in [
            ("sharpe", ev.bands.sharpe),
            ("max_drawdown", ev.bands.max_drawdown),
            ("var_95", ev.bands.var_95),
        ] {
            if !(band >= 0.0) {
                return Err(CliError::Config(format!(
                    "evaluation.bands.{name}: must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn market_series(
    config: &RunConfig,
    config_dir: &Path,
    seed: u64,
) -> Result<PriceSeries, CliError> {
    match &config.market {
        MarketSource::Gbm(gbm) => {
            generate_gbm(gbm, seed).map_err(|e| CliError::Config(format!("market.gbm: {e}")))
        }
        MarketSource::Csv(rel) => {
            let path = config_dir.join(rel);
            ingest_csv(&path).map_err(|e| CliError::Parse {
                path,
                message: e.to_string(),
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct AnswerLine {
    tick: u64,
    verdict: Verdict,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    basis_count: usize,
    learning_request: bool,
    realized: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_error(path))?))
}

fn write_track_record(record: &TrackRecord, path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "tick,equity,return")?;
        for (t, e) in record.equity().iter().enumerate() {
            match t.checked_sub(1).map(|i| record.returns()[i]) {
                Some(r) => writeln!(out, "{t},{e:?},{r:?}")?,
                None => writeln!(out, "{t},{e:?},")?,
            }
        }
        out.flush()
    };
    write().map_err(io_error(path))
}

fn write_answers(entry: &SweepEntry, path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    for a in &entry.run.answers {
        let line = AnswerLine {
            tick: a.tick,
            verdict: a.answer.verdict,
            ci_lo: a.answer.confidence_interval.map(|iv| iv.lo),
            ci_hi: a.answer.confidence_interval.map(|iv| iv.hi),
            basis_count: a.answer.basis.len(),
            learning_request: a.answer.learning_request,
            realized: a.realized,
        };
        let json = serde_json::to_string(&line).map_err(numeric)?;
        writeln!(out, "{json}").map_err(io_error(path))?;
    }
    out.flush().map_err(io_error(path))
}

fn write_report(report: &TuringReport, path: &Path) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report).map_err(numeric)?;
    json.push('\n');
    std::fs::write(path, json).map_err(io_error(path))
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:?}"))
}

fn write_ranking(entries: &[SweepEntry], path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    writeln!(
        out,
        "rank,agent,score,sharpe,max_drawdown,var_95,final_equity,trades,store_size"
    )
    .map_err(io_error(path))?;
    for e in entries {
        let record = &e.run.record;
        let (sharpe, mdd, var) = match risk_metrics(record) {
            Ok(m) => (
                opt(m.sharpe),
                format!("{:?}", m.max_drawdown),
                format!("{:?}", m.var_95),
            ),
            Err(_) => (String::new(), String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{:?},{},{},{},{:?},{},{}",
            e.rank,
            e.index,
            e.score,
            sharpe,
            mdd,
            var,
            record.equity()[record.equity().len() - 1],
            record.trades().len(),
            e.run.store_size
        )
        .map_err(io_error(path))?;
    }
    out.flush().map_err(io_error(path))
}

pub fn run_simulate(args: &SimulateArgs, stdout: &mut impl Write) -> Result<Outcome, CliError> {
    let config = load_config(&args.config)?;
    let config_dir = args.config.parent().unwrap_or(Path::new("."));
    let seed = args.seed.unwrap_or(config.seed);
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|d| config_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("."));
    let series = market_series(&config, config_dir, seed)?;

    let entries = sweep(&config.agents, &series).map_err(numeric)?;
    let best = &entries[0];
    let benchmark = TrackRecord::from_equity(series.prices(), Vec::new()).map_err(numeric)?;
    let report = turing_test(
        &best.run.record,
        &benchmark,
        config.evaluation.threshold,
        &config.evaluation.bands,
    )
    .map_err(numeric)?;

    std::fs::create_dir_all(&out_dir).map_err(io_error(&out_dir))?;
    write_track_record(&best.run.record, &out_dir.join("trackrecord.csv"))?;
    write_answers(best, &out_dir.join("answers.jsonl"))?;
    write_report(&report, &out_dir.join("turing_report.json"))?;
    write_ranking(&entries, &out_dir.join("sweep_ranking.csv"))?;

    let line = format!(
        "agents {} ticks {} best agent {} score {:?} verdict vs buy-and-hold {:?}",
        entries.len(),
        series.len(),
        best.index,
        best.score,
        report.verdict
    );
    writeln!(stdout, "{line}").map_err(numeric)?;
    Ok(Outcome::Success)
}

/// Reads a `tick,equity,return` file as written by `simulate`.
pub fn read_track_record(path: &Path) -> Result<TrackRecord, CliError> {
    let parse_err = |message: String| CliError::Parse {
        path: path.to_owned(),
        message,
    };
    let file = File::open(path).map_err(|e| parse_err(e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(format!("line 1: {e}")))?;
    if header != vec!["tick", "equity", "return"] {
        return Err(parse_err(format!(
            "line 1: expected header `tick,equity,return`, found {header:?}"
        )));
    }
    let (mut equity, mut returns) = (Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        if record.len() != 3 {
            return Err(parse_err(format!(
                "line {line}: expected 3 fields, found {}",
                record.len()
            )));
        }
        let num = |field: &str, name: &str| -> Result<f64, CliError> {
            field
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("line {line}: {name} {field:?}: {e}")))
        };
        equity.push(num(&record[1], "equity")?);
        if i == 0 {
            if !record[2].trim().is_empty() {
                returns.push(num(&record[2], "return")?);
            }
        } else {
            returns.push(num(&record[2], "return")?);
        }
    }
    if returns.len() == equity.len() {
        // a leading return relates to a tick before the file starts
        returns.remove(0);
    }
    TrackRecord::with_returns(equity, returns, Vec::new()).map_err(|e| parse_err(e.to_string()))
}

pub fn run_turing(args: &TuringArgs, stdout: &mut impl Write) -> Result<Outcome, CliError> {
    if !(args.threshold >= 0.0) {
        return Err(CliError::Config("--threshold: must be non-negative".into()));
    }
    let a = read_track_record(&args.a)?;
    let b = read_track_record(&args.b)?;
    let report = turing_test(&a, &b, args.threshold, &MetricBands::default()).map_err(numeric)?;
    std::fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    write_report(&report, &args.out.join("turing_report.json"))?;
    writeln!(
        stdout,
        "rho {:?}\ndistance {}\nverdict {:?}",
        report.rho, report.distance, report.verdict
    )
    .map_err(numeric)?;
    Ok(match report.verdict {
        TuringVerdict::Indistinguishable => Outcome::Success,
        TuringVerdict::Distinguishable => Outcome::Distinguishable,
    })
}

/// Rows of a numeric CSV. A first row that does not parse as numbers is
/// taken as a header.
pub fn read_dataset(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let parse_err = |message: String| CliError::Parse {
        path: path.to_owned(),
        message,
    };
    let file = File::open(path).map_err(|e| parse_err(e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                    return Err(parse_err(format!(
                        "line {line}: column {} is not finite",
                        j + 1
                    )));
                }
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(parse_err(format!(
                            "line {line}: expected {} fields, found {}",
                            first.len(),
                            row.len()
                        )));
                    }
                }
                rows.push(row);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(parse_err(format!("line {line}: {e}"))),
        }
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub divergence: Divergence,
    /// Dimension compared in: the projected width, or the bin count.
    pub k: usize,
    /// Maps drawn before one preserved the gap between the dataset means.
    pub attempts: u32,
}

/// Pads both datasets to a common width, projects every row through one
/// map (`k` for two points at `epsilon`, checked on the two mean vectors),
/// and compares the normals fitted to the projected rows.
pub fn gaussian_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    epsilon: f64,
    seed: u64,
) -> Result<DistanceResult, CliError> {
    let width = a[0].len().max(b[0].len());
    let padded_mean = |rows: &[Vec<f64>]| {
        let mut m = vec![0.0; width];
        for r in rows {
            m.iter_mut().zip(r).for_each(|(s, x)| *s += x);
        }
        m.iter_mut().for_each(|s| *s /= rows.len() as f64);
        m
    };
    let map = find_map(
        &[padded_mean(a), padded_mean(b)],
        epsilon,
        seed,
        DEFAULT_MAX_ATTEMPTS,
    )
    .map_err(|e| match e {
        JlError::InvalidEpsilon(_) => CliError::Config(format!("--epsilon: {e}")),
        other => numeric(other),
    })?;
    let fit = |rows: &[Vec<f64>]| -> Result<_, CliError> {
        let mut data = Vec::with_capacity(rows.len() * map.k());
        for r in rows {
            data.extend(map.project_padded(r).map_err(numeric)?);
        }
        let m = Matrix::from_row_major(rows.len(), map.k(), data).map_err(numeric)?;
        fit_gaussian_summary(&m).map_err(|e: NumericsError| numeric(e))
    };
    let divergence = bc_normal_mv(&fit(a)?, &fit(b)?).map_err(|e: DivergenceError| numeric(e))?;
    Ok(DistanceResult {
        divergence,
        k: map.k(),
        attempts: map.attempts(),
    })
}

/// Histograms every value of each dataset on `bins` equal-width bins spanning
/// both, then compares the two discrete distributions.
pub fn histogram_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    bins: usize,
) -> Result<DistanceResult, CliError> {
    if bins == 0 {
        return Err(CliError::Config("--bins: must be at least 1".into()));
    }
    let values = |rows: &[Vec<f64>]| rows.iter().flatten().copied().collect::<Vec<f64>>();
    let (va, vb) = (values(a), values(b));
    let lo = va.iter().chain(&vb).copied().fold(f64::INFINITY, f64::min);
    let hi = va
        .iter()
        .chain(&vb)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let counts = |vs: &[f64]| {
        let mut c = vec![0.0; bins];
        for &v in vs {
            let i = if width > 0.0 {
                ((v - lo) / width) as usize
            } else {
                0
            };
            c[i.min(bins - 1)] += 1.0;
        }
        c
    };
    let dist = |vs: &[f64]| DiscreteDistribution::from_counts(&counts(vs)).map_err(numeric);
    let divergence = bc_discrete(&dist(&va)?, &dist(&vb)?).map_err(numeric)?;
    Ok(DistanceResult {
        divergence,
        k: bins,
        attempts: 0,
    })
}

pub fn run_distance(args: &DistanceArgs, stdout: &mut impl Write) -> Result<Outcome, CliError> {
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(CliError::Config(format!(
            "--epsilon: must lie in (0, 1), got {}",
            args.epsilon
        )));
    }
    let a = read_dataset(&args.a)?;
    let b = read_dataset(&args.b)?;
    let result = match args.mode {
        DistanceMode::Gaussian => gaussian_distance(&a, &b, args.epsilon, args.seed)?,
        DistanceMode::Histogram => histogram_distance(&a, &b, args.bins)?,
    };
    writeln!(
        stdout,
        "rho {:?}\ndistance {}\nk {}\nattempts {}",
        result.divergence.coefficient(),
        result.divergence.distance(),
        result.k,
        result.attempts
    )
    .map_err(numeric)?;
    Ok(Outcome::Success)
}
