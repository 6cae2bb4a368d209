use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use narmsr::degradation::{make_gaussian_kernel, DegradationMode, DegradationOp, GaussianKernel, DEFAULT_KERNEL_SIZE};
use narmsr::io::write_image;
use narmsr::ImageGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files::{create_dir, list_images, load, sha256_file, stem, write_json, write_text, RunInfo};

/// Operator selection shared by `degrade` and `sr`.
#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    /// Blur width for blur_direct.
    #[arg(long)]
    pub kernel_width: Option<f64>,
    /// Odd kernel side length.
    #[arg(long, default_value_t = DEFAULT_KERNEL_SIZE)]
    pub kernel_size: usize,
    /// Kernel file (`size width` header, then taps); overrides --kernel-width.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
}

pub fn build_op(mode: &str, scale: usize, k: &KernelArgs) -> CliResult<DegradationOp> {
    let mode: DegradationMode = mode.parse()?;
    let kernel = match (mode, &k.kernel, k.kernel_width) {
        (DegradationMode::BlurDirect, Some(path), _) => Some(GaussianKernel::from_text(&crate::files::read_text(path)?)?),
        (DegradationMode::BlurDirect, None, Some(w)) => Some(make_gaussian_kernel(w, k.kernel_size)?),
        (DegradationMode::BlurDirect, None, None) => {
            return Err(CliError::usage("blur_direct needs --kernel-width or --kernel"))
        }
        (_, None, None) => None,
        _ => return Err(CliError::usage(format!("{mode} takes no blur kernel"))),
    };
    Ok(DegradationOp::new(mode, scale, kernel)?)
}

#[derive(Args, Debug)]
pub struct DegradeArgs {
    /// Directory of high-resolution images.
    #[arg(long = "input", short = 'i')]
    pub input: PathBuf,
    /// Directory for the low-resolution images.
    #[arg(long = "output", short = 'o')]
    pub output: PathBuf,
    /// bicubic, direct or blur_direct.
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub scale: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Standard deviation of additive Gaussian noise, in [0, 1] intensity units.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Noise seed; required when --noise-sigma > 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct DegradeEntry {
    name: String,
    input_sha256: String,
    output_sha256: String,
    hr_size: (usize, usize),
    lr_size: (usize, usize),
}

#[derive(Serialize)]
struct DegradeManifest {
    #[serde(flatten)]
    run: RunInfo,
    mode: String,
    scale: usize,
    kernel_width: Option<f64>,
    kernel_size: Option<usize>,
    noise_sigma: f64,
    seed: Option<u64>,
    images: Vec<DegradeEntry>,
    seconds: f64,
}

/// Adds seeded noise; image `index` gets its own ChaCha stream.
fn add_noise(img: &ImageGrid, sigma: f64, seed: u64, index: usize) -> CliResult<ImageGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let normal = Normal::new(0.0, sigma).map_err(|e| CliError::usage(format!("noise sigma: {e}")))?;
    let data = img.data().iter().map(|v| v + normal.sample(&mut rng)).collect();
    Ok(ImageGrid::new(img.height(), img.width(), img.channels(), data)?)
}

pub fn run(args: &DegradeArgs) -> CliResult<()> {
    let t0 = Instant::now();
    if !(args.noise_sigma >= 0.0) || !args.noise_sigma.is_finite() {
        return Err(CliError::usage("--noise-sigma must be a finite value >= 0"));
    }
    if args.noise_sigma > 0.0 && args.seed.is_none() {
        return Err(CliError::usage("--seed is required when --noise-sigma > 0"));
    }
    let op = build_op(&args.mode, args.scale, &args.kernel)?;
    let inputs = list_images(&args.input)?;
    create_dir(&args.output)?;
    if let Some(k) = op.kernel() {
        write_text(&args.output.join("kernel.txt"), &k.to_text())?;
    }
    let images = inputs
        .par_iter()
        .enumerate()
        .map(|(i, path)| degrade_one(args, &op, i, path))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = DegradeManifest {
        run: RunInfo::current(),
        mode: op.mode().to_string(),
        scale: op.scale(),
        kernel_width: op.kernel().map(|k| k.width()),
        kernel_size: op.kernel().map(|k| k.size()),
        noise_sigma: args.noise_sigma,
        seed: args.seed,
        images,
        seconds: t0.elapsed().as_secs_f64(),
    };
    write_json(&args.output.join("manifest.json"), &manifest)
}

fn degrade_one(args: &DegradeArgs, op: &DegradationOp, index: usize, path: &Path) -> CliResult<DegradeEntry> {
    let hr = load(path)?;
    let mut lr = hr.map_planes(|p| op.apply(p))?;
    if args.noise_sigma > 0.0 {
        lr = add_noise(&lr, args.noise_sigma, args.seed.unwrap_or_default(), index)?;
    }
    let out = args.output.join(format!("{}.png", stem(path)));
    write_image(&out, &lr)?;
    log::info!("{} -> {}", path.display(), out.display());
    Ok(DegradeEntry {
        name: stem(path),
        input_sha256: sha256_file(path)?,
        output_sha256: sha256_file(&out)?,
        hr_size: hr.dims(),
        lr_size: lr.dims(),
    })
}
