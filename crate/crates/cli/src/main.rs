//! `reprometa`: exact meta-analysis of 2x2 trials from the command line.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use reprometa_core::repro::NonFinitePolicy;
use reprometa_core::{Error, Method, ProbMap};

#[derive(Debug, Parser)]
#[command(
    name = "reprometa",
    version,
    about = "Confidence intervals for the common odds ratio that keep zero-total-event studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a dataset CSV (study_id,x_control,n_control,y_treatment,m_treatment).
    Analyze(AnalyzeArgs),
    /// Run a coverage study described by a scenario JSON file.
    Simulate(SimulateArgs),
    /// Compare repro intervals with and without zero-total studies.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbMapArg {
    Logit,
    ExpClamped,
}

impl From<ProbMapArg> for ProbMap {
    fn from(p: ProbMapArg) -> Self {
        match p {
            ProbMapArg::Logit => ProbMap::Logit,
            ProbMapArg::ExpClamped => ProbMap::ExpClamped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonFiniteArg {
    Less,
    NotLess,
    Barrier,
}

impl From<NonFiniteArg> for NonFinitePolicy {
    fn from(p: NonFiniteArg) -> Self {
        match p {
            NonFiniteArg::Less => NonFinitePolicy::Less,
            NonFiniteArg::NotLess => NonFinitePolicy::NotLess,
            NonFiniteArg::Barrier => NonFinitePolicy::Barrier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Mh,
    Peto,
    Repro,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mh => Method::Mh,
            MethodArg::Peto => Method::Peto,
            MethodArg::Repro => Method::Repro,
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad LO: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad HI: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("need finite LO <= HI, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Settings of the repro interval. Every field is recorded in the manifest.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ReproArgs {
    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    /// Monte-Carlo replicates M.
    #[arg(long, default_value_t = 1000)]
    pub mc_samples: usize,
    /// Number of theta grid points Q.
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    /// Grid range on the log odds ratio scale, e.g. `-2,1.5`. Defaults to the
    /// 99.95% Mantel-Haenszel interval.
    #[arg(long, value_name = "LO,HI", value_parser = parse_range, allow_hyphen_values = true)]
    pub grid_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ProbMapArg::Logit)]
    pub prob_map: ProbMapArg,
    /// How infinite or undefined simulated statistics are counted.
    #[arg(long, value_enum, default_value_t = NonFiniteArg::Less)]
    pub non_finite: NonFiniteArg,
    /// Bisect each interval endpoint against its rejected neighbour.
    #[arg(long)]
    pub refine_endpoints: bool,
}

impl ReproArgs {
    pub fn config(&self) -> reprometa_core::ReproConfig {
        reprometa_core::ReproConfig {
            alpha: self.alpha,
            mc_samples: self.mc_samples,
            grid_points: self.grid_points,
            grid_range: self.grid_range,
            seed: self.seed,
            prob_map: self.prob_map.into(),
            non_finite: self.non_finite.into(),
            refine_endpoints: self.refine_endpoints,
            ..Default::default()
        }
    }
}

/// Flags that affect how a run executes or prints but never its numbers.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    /// Methods to run; repeat or comma-separate.
    #[arg(long = "method", value_enum, value_delimiter = ',', default_values_t = [MethodArg::Mh, MethodArg::Peto, MethodArg::Repro])]
    pub methods: Vec<MethodArg>,
    /// Drop studies with no events in either arm before analysis.
    #[arg(long)]
    pub exclude_zero_total: bool,
    /// Continuity correction for the Mantel-Haenszel estimate (0 or 0.5).
    #[arg(long, default_value_t = 0.0)]
    pub cc: f64,
    #[command(flatten)]
    pub repro: ReproArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Directory for `<name>.report.csv` and `<name>.manifest.json`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Dataset CSV; omit when using `--builtin`.
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    pub input: Option<PathBuf>,
    /// Built-in five-study dataset.
    #[arg(long, value_parser = ["a", "b"])]
    pub builtin: Option<String>,
    #[command(flatten)]
    pub repro: ReproArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::UndefinedEstimate(_)) => 3,
        Some(Error::EmptyConfidenceSet { .. }) => 4,
        Some(Error::OptimizerFailure) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match &cli.command {
        Command::Analyze(a) => &a.run,
        Command::Simulate(a) => &a.run,
        Command::Compare(a) => &a.run,
    };
    let result = match run.workers {
        Some(0) => Err(anyhow::Error::new(Error::InvalidConfig("--workers must be >= 1".into()))),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli.command)),
            Err(e) => Err(anyhow::anyhow!("cannot start worker pool: {e}")),
        },
        None => commands::dispatch(&cli.command),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
