use std::path::PathBuf;

use clap::{Args, Subcommand};
use narmsr::degradation::{kernel_stretch, make_gaussian_kernel, pca_fit, GaussianKernel, KernelCodebook, DEFAULT_KERNEL_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files::{create_dir, list_kernel_files, read_text, write_json, write_text, RunInfo};

#[derive(Subcommand, Debug)]
pub enum KernelsCmd {
    /// Sample kernel widths uniformly and write one kernel file each.
    Gen(GenArgs),
    /// Fit a PCA codebook to a directory of kernel files.
    Pca(PcaArgs),
    /// Project one kernel and broadcast its coefficients to a d x H x W map.
    Stretch(StretchArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0.2)]
    pub min_width: f64,
    #[arg(long, default_value_t = 3.0)]
    pub max_width: f64,
    #[arg(long, default_value_t = DEFAULT_KERNEL_SIZE)]
    pub size: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Directory of kernel files (`*.txt`).
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    /// Picks d = 6, 8, 10 for scales 2, 3, 4.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Explicit codebook dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct StretchArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
}

pub fn run(cmd: &KernelsCmd) -> CliResult<()> {
    match cmd {
        KernelsCmd::Gen(a) => gen(a),
        KernelsCmd::Pca(a) => pca(a),
        KernelsCmd::Stretch(a) => stretch(a),
    }
}

#[derive(Serialize)]
struct GenManifest {
    #[serde(flatten)]
    run: RunInfo,
    seed: u64,
    size: usize,
    widths: Vec<f64>,
}

fn gen(a: &GenArgs) -> CliResult<()> {
    if a.count == 0 {
        return Err(CliError::usage("--count must be >= 1"));
    }
    if !(a.min_width > 0.0 && a.min_width <= a.max_width && a.max_width.is_finite()) {
        return Err(CliError::usage(format!(
            "width range [{}, {}] must satisfy 0 < min <= max",
            a.min_width, a.max_width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let widths: Vec<f64> = (0..a.count).map(|_| rng.gen_range(a.min_width..=a.max_width)).collect();
    create_dir(&a.output)?;
    let digits = (a.count - 1).to_string().len().max(4);
    for (i, &w) in widths.iter().enumerate() {
        let k = make_gaussian_kernel(w, a.size)?;
        write_text(&a.output.join(format!("kernel_{i:0digits$}.txt")), &k.to_text())?;
    }
    write_json(
        &a.output.join("manifest.json"),
        &GenManifest {
            run: RunInfo::current(),
            seed: a.seed,
            size: a.size,
            widths,
        },
    )
}

/// Codebook size per scale factor.
pub fn dim_for_scale(scale: usize) -> CliResult<usize> {
    match scale {
        2 => Ok(6),
        3 => Ok(8),
        4 => Ok(10),
        s => Err(CliError::usage(format!("no default codebook size for scale {s}; pass --dim"))),
    }
}

fn pca(a: &PcaArgs) -> CliResult<()> {
    let d = match (a.dim, a.scale) {
        (Some(d), _) => d,
        (None, Some(s)) => dim_for_scale(s)?,
        (None, None) => return Err(CliError::usage("give --scale or --dim")),
    };
    let kernels = list_kernel_files(&a.input)?
        .iter()
        .map(|p| Ok(GaussianKernel::from_text(&read_text(p)?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let cb = pca_fit(&kernels, d)?;
    write_text(&a.output, &cb.to_text())
}

fn stretch(a: &StretchArgs) -> CliResult<()> {
    let kernel = GaussianKernel::from_text(&read_text(&a.kernel)?)?;
    let cb = KernelCodebook::from_text(&read_text(&a.codebook)?)?;
    if a.height == 0 || a.width == 0 {
        return Err(CliError::usage("--height and --width must be >= 1"));
    }
    let map = kernel_stretch(&kernel, &cb, a.height, a.width)?;
    write_text(&a.output, &map.to_text())
}
