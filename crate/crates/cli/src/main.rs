mod degrade;
mod error;
mod eval;
mod files;
mod kernels;
mod sr;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

/// Model-based super-resolution on image directories.
#[derive(Parser, Debug)]
#[command(name = "narmsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Produce low-resolution images from high-resolution ones.
    Degrade(degrade::DegradeArgs),
    /// Super-resolve every image in a directory.
    Sr(Box<sr::SrArgs>),
    /// Score reconstructions against ground truth (PSNR/SSIM on luminance).
    Eval(eval::EvalArgs),
    /// Kernel sampling, PCA codebooks and stretch maps.
    #[command(subcommand)]
    Kernels(kernels::KernelsCmd),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Degrade(a) => degrade::run(a),
        Command::Sr(a) => sr::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Kernels(c) => kernels::run(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
