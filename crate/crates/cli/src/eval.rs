use std::path::PathBuf;

use clap::Args;
use narmsr::metrics::evaluate_dataset;

use crate::error::{CliError, CliResult};
use crate::files::write_text;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reconstructions.
    #[arg(long)]
    pub sr: PathBuf,
    /// Ground truth, matched by file stem.
    #[arg(long)]
    pub gt: PathBuf,
    /// Border pixels dropped before scoring; defaults to --scale.
    #[arg(long)]
    pub crop: Option<usize>,
    #[arg(long)]
    pub scale: Option<usize>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let crop = args
        .crop
        .or(args.scale)
        .ok_or_else(|| CliError::usage("give --crop or --scale"))?;
    for dir in [&args.sr, &args.gt] {
        if !dir.is_dir() {
            return Err(CliError::Io {
                path: dir.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            });
        }
    }
    let report = evaluate_dataset(&args.sr, &args.gt, crop)?;
    let csv = report.to_csv();
    match &args.output {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    if report.missing.is_empty() {
        return Ok(());
    }
    for name in &report.missing {
        eprintln!("missing pair: {name}");
    }
    Err(CliError::Io {
        path: args.gt.clone(),
        source: std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} image(s) without a counterpart", report.missing.len()),
        ),
    })
}
