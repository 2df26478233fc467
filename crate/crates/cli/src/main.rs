//! `randmesh`: the file-mediated tomography pipeline, one stage per subcommand.

mod commands;
mod config;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Backend, Method};
use config::{parse_snr, ExperimentConfig, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(name = "randmesh", version, about = "Random-mesh projection tomography pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    grid_side: Option<usize>,
    #[arg(long, global = true)]
    sensors: Option<usize>,
    /// Triangles per mesh.
    #[arg(long, global = true)]
    triangles: Option<usize>,
    /// Number of meshes.
    #[arg(long, global = true)]
    subspaces: Option<usize>,
    /// Test measurement SNR in dB, or `inf`.
    #[arg(long, global = true, value_parser = parse_snr)]
    snr_db: Option<Option<f64>>,
    #[arg(long, global = true)]
    erasure_p: Option<f64>,
    /// TV weight of the recombination solve.
    #[arg(long, global = true)]
    tv_weight: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Shapes datasets under out/data/{train,test}.
    GenData,
    /// Random Delaunay meshes under out/meshes.
    GenMesh,
    /// Ray matrix and noiseless measurements under out/forward.
    Forward,
    /// Noise and erasures applied to the measurements, under out/corrupt.
    Corrupt,
    /// Box-constrained least-squares warm starts under out/warm.
    Nnls,
    /// Coefficient estimators under out/estimators.
    Train,
    /// Subspace coefficients of the test images under out/coeffs/<backend>.
    Estimate {
        #[arg(long, value_enum)]
        backend: Backend,
    },
    /// Test reconstructions under out/recon/<backend>.
    Reconstruct {
        #[arg(long, value_enum)]
        backend: Method,
    },
    /// Monte Carlo equivalent kernel under out/kernel.
    KernelMc,
    /// Output SNR table and panels under out/eval.
    Evaluate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let c = cli.common;
    let over = Overrides {
        grid_side: c.grid_side,
        sensors: c.sensors,
        triangles: c.triangles,
        subspaces: c.subspaces,
        snr_db: c.snr_db,
        erasure_p: c.erasure_p,
        tv_weight: c.tv_weight,
        seed: c.seed,
        out: c.out,
    };
    let cfg = ExperimentConfig::load(c.config.as_deref(), &over)?;
    commands::ensure_out(&cfg.out)?;
    match cli.command {
        Command::GenData => commands::gen_data(&cfg),
        Command::GenMesh => commands::gen_mesh(&cfg),
        Command::Forward => commands::forward_cmd(&cfg),
        Command::Corrupt => commands::corrupt(&cfg),
        Command::Nnls => commands::nnls_cmd(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Estimate { backend } => commands::estimate(&cfg, backend),
        Command::Reconstruct { backend } => commands::reconstruct(&cfg, backend),
        Command::KernelMc => commands::kernel_mc(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
