//! `triphoton` command-line tool.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "triphoton",
    version,
    about = "Multiphoton interference at multiport interferometers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-photon HOM coincidence curve versus delay.
    SimulateHom(SimulateHomArgs),
    /// Three-photon coincidence curve with one photon delayed.
    SimulateThreefold(SimulateThreefoldArgs),
    /// Transfer matrix from single-photon counts and HOM visibilities.
    Reconstruct(ReconstructArgs),
    /// Predicted two- and three-photon visibilities of a matrix.
    Predict(PredictArgs),
    /// Gaussian dip/peak fit of a delay scan.
    Fit(FitArgs),
    /// Per-input figure of merit of a candidate against a target.
    Fom(FomArgs),
    /// Reconstruction with Poisson Monte Carlo uncertainties.
    Montecarlo(MontecarloArgs),
    /// Synthetic dataset derived from the published device matrix.
    MakePaperDataset(DatasetArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct MatrixSource {
    /// Matrix JSON file.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Use the balanced 3x3 tritter.
    #[arg(long)]
    pub tritter: bool,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Delay grid start:stop:step in ps.
    #[arg(long, default_value = "-6:6:0.25", allow_hyphen_values = true)]
    pub delays: String,
    /// Wavepacket width in ps.
    #[arg(long, default_value_t = triphoton::distinguishability::DEFAULT_SIGMA_PS)]
    pub sigma: f64,
    /// Mean counts at large delay; the curve is Poisson-sampled when given.
    #[arg(long)]
    pub counts: Option<f64>,
    #[arg(long, env = "TRIPHOTON_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Integration time per point, seconds (metadata only).
    #[arg(long, default_value_t = triphoton::distinguishability::DEFAULT_INTEGRATION_TIME_S)]
    pub integration_time: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateHomArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Input modes i,j (1-based); the photon in j is delayed.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub inputs: Vec<usize>,
    /// Output modes l,m (1-based).
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub outputs: Vec<usize>,
    #[command(flatten)]
    pub curve: CurveArgs,
}

#[derive(Args, Debug)]
pub struct SimulateThreefoldArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub inputs: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub outputs: Vec<usize>,
    /// Input mode whose photon is delayed (1-based).
    #[arg(long, default_value_t = 1)]
    pub delayed: usize,
    #[command(flatten)]
    pub curve: CurveArgs,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub singles: PathBuf,
    #[arg(long)]
    pub visibilities: PathBuf,
    /// Number of Monte Carlo resamples (0 for none).
    #[arg(long, default_value_t = 0)]
    pub montecarlo: usize,
    #[arg(long, env = "TRIPHOTON_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MontecarloArgs {
    #[arg(long)]
    pub singles: PathBuf,
    #[arg(long)]
    pub visibilities: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub resamples: usize,
    #[arg(long, env = "TRIPHOTON_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Visibility CSV path; the JSON summary always goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Scan CSV (delay_ps,value), optionally with a .meta.json sidecar.
    #[arg(long)]
    pub scan: PathBuf,
    /// dip, peak or auto.
    #[arg(long, default_value = "auto")]
    pub mode: String,
    /// Poisson bootstrap resamples for the visibility error (0 for none).
    #[arg(long, default_value_t = 200)]
    pub resamples: usize,
    #[arg(long, env = "TRIPHOTON_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FomArgs {
    /// Candidate matrix JSON.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Target matrix JSON.
    #[arg(long, conflicts_with = "tritter", required_unless_present = "tritter")]
    pub target: Option<PathBuf>,
    /// Use the balanced 3x3 tritter as target.
    #[arg(long)]
    pub tritter: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Singles per input, summed over outputs.
    #[arg(long, default_value_t = triphoton::tomography::DEFAULT_SINGLES_LEVEL)]
    pub singles_level: f64,
    /// Mean large-delay two-photon coincidences per record.
    #[arg(long, default_value_t = triphoton::tomography::DEFAULT_PAIR_LEVEL)]
    pub pair_level: f64,
    /// Large-delay three-photon coincidences per scan point.
    #[arg(long, default_value_t = 300.0)]
    pub threefold_level: f64,
    /// HOM delay grid start:stop:step in ps.
    #[arg(long, default_value = "-6:6:0.25", allow_hyphen_values = true)]
    pub delays: String,
    /// Three-photon delay grid start:stop:step in ps.
    #[arg(long, default_value = "-4.5:4.5:1.5", allow_hyphen_values = true)]
    pub threefold_delays: String,
    #[arg(long, default_value_t = triphoton::distinguishability::DEFAULT_SIGMA_PS)]
    pub sigma: f64,
    /// Poisson-sample every count instead of writing expected values.
    #[arg(long)]
    pub poisson: bool,
    #[arg(long, env = "TRIPHOTON_SEED", default_value_t = 0)]
    pub seed: u64,
}

/// A failed command, with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(triphoton::Error),
}

impl From<triphoton::Error> for CliError {
    fn from(e: triphoton::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Usage(msg) => json!({ "error": "usage", "message": msg, "exit_code": 2 }),
            CliError::Core(e) => {
                let kind = match e {
                    _ if e.is_numerical() => "numerical",
                    triphoton::Error::Io(_) => "io",
                    triphoton::Error::Json(_)
                    | triphoton::Error::Csv(_)
                    | triphoton::Error::Format(_) => "format",
                    _ => "input",
                };
                let mut v = json!({ "error": kind, "message": e.to_string(), "exit_code": self.exit_code() });
                if let triphoton::Error::MissingRecords(keys) = e {
                    v["missing"] = json!(keys
                        .iter()
                        .map(|k| [k.0, k.1, k.2, k.3])
                        .collect::<Vec<_>>());
                }
                v
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    let result = match cli.command {
        Command::SimulateHom(a) => commands::simulate_hom(&a),
        Command::SimulateThreefold(a) => commands::simulate_threefold(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Fom(a) => commands::fom(&a),
        Command::Montecarlo(a) => commands::montecarlo(&a),
        Command::MakePaperDataset(a) => commands::make_paper_dataset(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
