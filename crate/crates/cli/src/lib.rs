//! The `liref` command line.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 usage error,
//! 3 verification failure.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use liref_core::{LossSpec, RieParams, ShiftEngine, WeightConvention};

mod commands;

pub use commands::{cmd_eval, cmd_refocus, cmd_train, cmd_verify};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "liref",
    version,
    about = "Light-field refocusing and refocused-image losses"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refocus a light field and write the image as PNG.
    Refocus(RefocusArgs),
    /// Compare a predicted light field against ground truth.
    Eval(EvalArgs),
    /// Check the spectral identities and gradients on random data.
    Verify(VerifyArgs),
    /// Run the loss comparison experiment.
    Train(TrainArgs),
}

/// Refocus-domain loss parameters shared by several subcommands.
#[derive(Debug, Clone, Args)]
pub struct RieArgs {
    /// Half-width of the refocus range.
    #[arg(long = "rie-D", default_value_t = 2.5)]
    pub rie_d: f64,
    /// Spacing of the refocus grid.
    #[arg(long = "rie-step", default_value_t = 0.25)]
    pub rie_step: f64,
    /// Weight of the refocused-image term.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Shift engine: spectral, spatial or spatial-circular.
    #[arg(long, default_value = "spectral")]
    pub engine: String,
    /// Gaussian weight convention: physical or index.
    #[arg(long, default_value = "physical")]
    pub convention: String,
}

impl RieArgs {
    pub fn engine(&self) -> Result<ShiftEngine, CliError> {
        ShiftEngine::parse(&self.engine).map_err(CliError::usage)
    }

    pub fn rie_params(&self) -> Result<RieParams, CliError> {
        let params = RieParams {
            d: self.rie_d,
            step: self.rie_step,
            convention: WeightConvention::parse(&self.convention).map_err(CliError::usage)?,
            engine: self.engine()?,
        };
        params.validate().map_err(CliError::usage)?;
        Ok(params)
    }

    /// Parses `label` and applies these parameters to it.
    pub fn loss_spec(&self, label: &str) -> Result<LossSpec, CliError> {
        let mut spec = LossSpec::from_label(label)
            .map_err(CliError::usage)?
            .with_rie(self.rie_params()?);
        spec.lambda = self.lambda;
        spec.validate().map_err(CliError::usage)?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct RefocusArgs {
    /// Light-field directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Refocus parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    #[arg(long, default_value = "spectral")]
    pub engine: String,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Bits per sample of the output PNG (8 or 16).
    #[arg(long, default_value_t = 8)]
    pub bits: u8,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Label written to the `config` column.
    #[arg(long, default_value = "pred")]
    pub label: String,
    /// Leave the center and corner views out of the view-domain block.
    #[arg(long)]
    pub exclude_inputs: bool,
    /// Loss reported on stderr alongside the metrics.
    #[arg(long, default_value = "vwe2+rie2")]
    pub loss: String,
    #[command(flatten)]
    pub rie: RieArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `AxAxHxW`: angular and spatial size of the random pair.
    #[arg(long, default_value = "3x3x8x8")]
    pub size: String,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, env = "LIREF_SEED", default_value_t = 7)]
    pub seed: u64,
    /// Relative tolerance of every check.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Trapezoid spacing of the quadrature.
    #[arg(long, default_value_t = 0.001)]
    pub q: f64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long = "rie-D", default_value_t = 2.5)]
    pub rie_d: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding one light field, or one sub-directory per scene.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub data: Option<PathBuf>,
    /// Use generated occlusion scenes instead of a dataset.
    #[arg(long)]
    pub synthetic: bool,
    /// Number of generated scenes.
    #[arg(long, default_value_t = 5)]
    pub scenes: usize,
    /// Spatial size of generated scenes.
    #[arg(long, default_value_t = 32)]
    pub scene_size: usize,
    /// Comma-separated loss labels.
    #[arg(
        long,
        default_value = "vwe1,vwe1+rie1,vwe2,vwe2+rie2",
        value_delimiter = ','
    )]
    pub configs: Vec<String>,
    #[arg(long, env = "LIREF_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub kfold: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Output directory.
    #[arg(long, default_value = "liref-run")]
    pub out: PathBuf,
    #[command(flatten)]
    pub rie: RieArgs,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verify(String),
}

impl CliError {
    pub fn usage(e: impl fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn io(e: impl fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "error: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let job = |cmd: Command| match cmd {
        Command::Refocus(a) => cmd_refocus(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Train(a) => cmd_train(&a),
    };
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::io)?
            .install(|| job(cli.command)),
        None => job(cli.command),
    }
}
