//! `bitsim` — pipeline driver for the bit-serial accelerator model.
//!
//! Subcommands: quantize, encode, plan, simulate, report, check, run,
//! gen-weights. Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod manifest;
mod ops;
mod output;

use manifest::{RunManifest, WeightSource};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "bitsim",
    version,
    about = "Sparse bit-serial systolic accelerator model",
    disable_help_subcommand = true
)]
struct Cli {
    /// Arch config TOML (defaults to the built-in 32x32 @ 1 GHz design).
    #[arg(long, global = true)]
    arch: Option<PathBuf>,

    /// Operand precision: 16b or 8b.
    #[arg(long, global = true, default_value = "16b")]
    mode: String,

    /// Workload timing policy: dense, imbalanced, or balanced.
    #[arg(long, global = true, default_value = "balanced")]
    workload: String,

    /// Seed for generated weights and feature maps.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Cap each weight's nonzero bits and report the error statistics.
    Quantize {
        /// Bundled network name or config path.
        #[arg(long)]
        network: String,
        /// Input weight file.
        #[arg(long)]
        weights: PathBuf,
        /// Override every layer's NNZB cap.
        #[arg(long)]
        n_max: Option<u8>,
    },
    /// Convert weights to the sign/position/bitmap format.
    Encode {
        #[arg(long)]
        network: String,
        /// Input weight file (quantized or raw; raw is quantized first).
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        n_max: Option<u8>,
    },
    /// Print tiling and both dataflows' DRAM traffic per layer.
    Plan {
        #[arg(long)]
        network: String,
        #[arg(long)]
        n_max: Option<u8>,
    },
    /// Run the cycle model over an encoded weight file.
    Simulate {
        #[arg(long)]
        network: String,
        /// Encoded weight file from `encode`.
        #[arg(long)]
        encoded: PathBuf,
    },
    /// Energy report and ratios for a finished run.
    Report {
        /// Run directory holding summary.json.
        #[arg(long)]
        run: PathBuf,
        /// Optional second run to compare against (defaults to the run's
        /// embedded dense baseline).
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Oracle equivalence suites (exhaustive MAC checks and friends).
    Check,
    /// Full pipeline: validate, quantize, encode, plan, simulate, report.
    Run {
        /// Manifest TOML; overrides the individual flags.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        network: Option<String>,
        /// Weight file; omit to generate from --seed.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        n_max: Option<u8>,
    },
    /// Write a deterministic random weight file.
    GenWeights {
        #[arg(long)]
        network: String,
        /// uniform, profiled:<k>, or profiled:<w0,w1,...>.
        #[arg(long, default_value = "uniform")]
        dist: String,
        /// Output file (defaults to <out>/weights.bin).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn precision_of(mode: &str) -> Result<bitsim_core::Precision, CliError> {
    match mode {
        "16b" => Ok(bitsim_core::Precision::Bits16),
        "8b" => Ok(bitsim_core::Precision::Bits8),
        other => Err(CliError::Usage(format!("mode {other:?} (want 16b or 8b)"))),
    }
}

fn workload_of(name: &str) -> Result<bitsim_core::WorkloadMode, CliError> {
    match name {
        "dense" => Ok(bitsim_core::WorkloadMode::DenseBitSerial),
        "imbalanced" => Ok(bitsim_core::WorkloadMode::SparseImbalanced),
        "balanced" => Ok(bitsim_core::WorkloadMode::SparseBalanced),
        other => Err(CliError::Usage(format!(
            "workload {other:?} (want dense, imbalanced, or balanced)"
        ))),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let precision = precision_of(&cli.mode)?;
    match cli.cmd {
        Cmd::Quantize {
            network,
            weights,
            n_max,
        } => ops::cmd_quantize(
            &network,
            cli.arch.as_deref(),
            precision,
            n_max,
            &weights,
            &cli.out,
        ),
        Cmd::Encode {
            network,
            weights,
            n_max,
        } => ops::cmd_encode(
            &network,
            cli.arch.as_deref(),
            precision,
            n_max,
            &weights,
            &cli.out,
        ),
        Cmd::Plan { network, n_max } => {
            ops::cmd_plan(&network, cli.arch.as_deref(), precision, n_max, &cli.out)
        }
        Cmd::Simulate { network, encoded } => ops::cmd_simulate(
            &network,
            cli.arch.as_deref(),
            &ops::SimArgs {
                precision,
                workload: workload_of(&cli.workload)?,
                seed: cli.seed,
                mode_name: &cli.mode,
                workload_name: &cli.workload,
            },
            &encoded,
            &cli.out,
        ),
        Cmd::Report { run, baseline } => {
            ops::cmd_report(&run, baseline.as_deref(), cli.arch.as_deref(), &cli.out)
        }
        Cmd::Check => ops::cmd_check(),
        Cmd::Run {
            manifest,
            network,
            weights,
            n_max,
        } => {
            let m = match manifest {
                Some(path) => RunManifest::load(&path)?,
                None => RunManifest {
                    network: network.ok_or_else(|| {
                        CliError::Usage("run needs --manifest or --network".into())
                    })?,
                    weights: match weights {
                        Some(p) => WeightSource::File(p),
                        None => WeightSource::Seed(cli.seed),
                    },
                    arch: cli.arch.clone(),
                    mode: cli.mode.clone(),
                    workload: cli.workload.clone(),
                    n_max,
                    out: cli.out.clone(),
                },
            };
            ops::run_pipeline(&m).map(|_| ())
        }
        Cmd::GenWeights {
            network,
            dist,
            output,
        } => {
            let out_file = output.unwrap_or_else(|| cli.out.join("weights.bin"));
            ops::cmd_gen_weights(&network, precision, cli.seed, &dist, &out_file)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
