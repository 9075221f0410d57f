mod commands;
mod config;
mod render;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Cloth state estimation pipeline: simulate, train, infer, evaluate.
#[derive(Parser)]
#[command(name = "clothdiff", version, disable_help_subcommand = true)]
struct Cli {
    /// JSON config file providing defaults for all subcommands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Refine {
    None,
    Spr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegMethod {
    Cpd,
    Spr,
    Icp2d,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate pick-and-place episodes and write a dataset directory.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        actions: Option<usize>,
        /// Cloth grid resolution (vertices per side).
        #[arg(long)]
        grid: Option<usize>,
        /// Depth image resolution (pixels per side).
        #[arg(long)]
        img: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the conditional denoiser on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        /// Forward-process (training) timestep count.
        #[arg(long)]
        train_steps: Option<usize>,
        /// Strided timestep count used at inference.
        #[arg(long)]
        infer_steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Final learning rate of a per-epoch cosine decay (default: no decay).
        #[arg(long)]
        lr_final: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict one sample's mesh and export it as PLY.
    Infer {
        #[arg(long)]
        model: PathBuf,
        /// Sample as DIR/index, e.g. data/7.
        #[arg(long)]
        sample: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Refine::None)]
        refine: Refine,
        #[arg(long)]
        infer_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a model over a dataset and write a JSON report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Refine::None)]
        refine: Refine,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        infer_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Register one PLY point set onto another.
    Register {
        #[arg(long, value_enum)]
        method: RegMethod,
        /// Template (moved) point set.
        #[arg(long)]
        src: PathBuf,
        /// Reference (fixed) point set.
        #[arg(long)]
        dst: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a mesh (PLY) or translation map (PPM) preview image.
    Viz {
        #[arg(long, conflicts_with = "map")]
        mesh: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Usage errors exit 1, runtime errors exit 2.
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<clothdiff_core::Error> for CliError {
    fn from(e: clothdiff_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn require_exists(path: &std::path::Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("no such file or directory: {}", path.display())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let cfg = match config::RunConfig::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::GenData { out, episodes, actions, grid, img, seed } => {
            commands::gen_data(cfg, &out, episodes, actions, grid, img, seed)
        }
        Command::Train { data, out, epochs, batch, train_steps, infer_steps, lr, lr_final, seed } => {
            commands::train(
                cfg, &data, &out, epochs, batch, train_steps, infer_steps, lr, lr_final, seed,
            )
        }
        Command::Infer { model, sample, out, refine, infer_steps, seed } => {
            commands::infer(cfg, &model, &sample, &out, refine, infer_steps, seed)
        }
        Command::Eval { model, data, refine, report, infer_steps, seed } => {
            commands::eval(cfg, &model, &data, refine, &report, infer_steps, seed)
        }
        Command::Register { method, src, dst, out } => {
            commands::register(cfg, method, &src, &dst, &out)
        }
        Command::Viz { mesh, map, out } => commands::viz(mesh.as_deref(), map.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
