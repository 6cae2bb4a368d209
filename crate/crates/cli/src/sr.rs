use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use narmsr::io::write_image;
use narmsr::metrics::{cap_psnr, psnr};
use narmsr::solver::{RunLog, Solver, SolverConfig};
use narmsr::ImageGrid;
use rayon::prelude::*;
use serde::Serialize;

use crate::degrade::{build_op, KernelArgs};
use crate::error::{CliError, CliResult};
use crate::files::{
    create_dir, list_images, load, read_text, sha256_file, sha256_grid, stem, write_json, write_text, RunInfo,
};

/// One flag per config key; each overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigFlags {
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub gamma_narm: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    /// Step for e: a number or `auto`.
    #[arg(long)]
    pub delta: Option<String>,
    /// Step for x: a number or `auto`.
    #[arg(long)]
    pub delta_prime: Option<String>,
    #[arg(long)]
    pub step_fraction: Option<String>,
    #[arg(long)]
    pub power_iterations: Option<String>,
    #[arg(long)]
    pub stages: Option<String>,
    #[arg(long)]
    pub inner_x_steps: Option<String>,
    #[arg(long)]
    pub inner_e_steps: Option<String>,
    /// Solver mode: mog or dpdnn.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub printed_e_sign: Option<String>,
    /// Denoiser name: identity, gaussian or nlm.
    #[arg(long)]
    pub denoiser: Option<String>,
    #[arg(long)]
    pub strength: Option<String>,
    #[arg(long)]
    pub strength_decay: Option<String>,
    /// closed_form or attention.
    #[arg(long)]
    pub narm_backend: Option<String>,
    #[arg(long)]
    pub patch_size: Option<String>,
    #[arg(long)]
    pub neighbors: Option<String>,
    #[arg(long)]
    pub search_window: Option<String>,
    #[arg(long)]
    pub gamma_reg: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub embedding_weights: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("mu", &self.mu),
            ("gamma_narm", &self.gamma_narm),
            ("eta", &self.eta),
            ("delta", &self.delta),
            ("delta_prime", &self.delta_prime),
            ("step_fraction", &self.step_fraction),
            ("power_iterations", &self.power_iterations),
            ("stages", &self.stages),
            ("inner_x_steps", &self.inner_x_steps),
            ("inner_e_steps", &self.inner_e_steps),
            ("mode", &self.mode),
            ("printed_e_sign", &self.printed_e_sign),
            ("denoiser", &self.denoiser),
            ("strength", &self.strength),
            ("strength_decay", &self.strength_decay),
            ("narm_backend", &self.narm_backend),
            ("patch_size", &self.patch_size),
            ("neighbors", &self.neighbors),
            ("search_window", &self.search_window),
            ("gamma_reg", &self.gamma_reg),
            ("q", &self.q),
            ("embedding_weights", &self.embedding_weights),
        ]
    }
}

#[derive(Args, Debug)]
pub struct SrArgs {
    /// Directory of low-resolution images.
    #[arg(long = "input", short = 'i')]
    pub input: PathBuf,
    /// Directory for reconstructions, logs and the manifest.
    #[arg(long = "output", short = 'o')]
    pub output: PathBuf,
    /// Degradation the inputs went through: bicubic, direct or blur_direct.
    #[arg(long, default_value = "bicubic")]
    pub degradation: String,
    #[arg(long)]
    pub scale: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Average the eight flipped/rotated reconstructions.
    #[arg(long)]
    pub plus: bool,
    /// Ground-truth directory; adds per-stage PSNR to the logs.
    #[arg(long)]
    pub gt: Option<PathBuf>,
}

/// Default config, then the file, then per-key flags, then `--set`.
/// Every offending key is reported.
pub fn resolve_config(file: Option<&Path>, flags: &ConfigFlags, set: &[String]) -> CliResult<SolverConfig> {
    let mut cfg = SolverConfig::default();
    let mut problems = Vec::new();
    if let Some(path) = file {
        if let Err(e) = cfg.apply_text(&read_text(path)?) {
            problems.push(format!("{}: {e}", path.display()));
        }
    }
    for (key, value) in flags.pairs() {
        if let Some(v) = value {
            if let Err(e) = cfg.set(key, v) {
                problems.push(format!("--{}: {e}", key.replace('_', "-")));
            }
        }
    }
    for kv in set {
        match kv.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = cfg.set(k, v) {
                    problems.push(format!("--set {kv}: {e}"));
                }
            }
            None => problems.push(format!("--set {kv:?}: expected KEY=VALUE")),
        }
    }
    if problems.is_empty() {
        if let Err(e) = cfg.validate() {
            problems.push(e.to_string());
        }
    }
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::usage(format!("invalid configuration: {}", problems.join("; "))))
    }
}

#[derive(Serialize)]
struct SrEntry {
    name: String,
    input_sha256: String,
    output_sha256: String,
    /// Hashes of the eight ensemble branches before averaging.
    #[serde(skip_serializing_if = "Option::is_none")]
    branch_sha256: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gt_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr_db: Option<f64>,
    seconds: f64,
}

#[derive(Serialize)]
struct SrManifest {
    #[serde(flatten)]
    run: RunInfo,
    degradation: String,
    scale: usize,
    kernel_width: Option<f64>,
    config_file_sha256: Option<String>,
    config: BTreeMap<&'static str, String>,
    narm_backend: &'static str,
    plus: bool,
    images: Vec<SrEntry>,
    seconds: f64,
}

/// Sidecar: per-channel logs for a single run, per-branch for `--plus`.
#[derive(Serialize)]
struct SrLog<'a> {
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    channels: Option<&'a [RunLog]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branches: Option<&'a [Vec<RunLog>]>,
}

pub fn run(args: &SrArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg = resolve_config(args.config.as_deref(), &args.flags, &args.set)?;
    let op = build_op(&args.degradation, args.scale, &args.kernel)?;
    let solver = Solver::new(op.clone(), cfg.clone())?;
    let inputs = list_images(&args.input)?;
    let gt_index: BTreeMap<String, PathBuf> = match &args.gt {
        Some(dir) => list_images(dir)?.into_iter().map(|p| (stem(&p), p)).collect(),
        None => BTreeMap::new(),
    };
    create_dir(&args.output)?;
    write_text(&args.output.join("config.txt"), &cfg.to_text())?;
    let images = inputs
        .par_iter()
        .map(|path| sr_one(args, &solver, path, gt_index.get(&stem(path)).map(PathBuf::as_path)))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = SrManifest {
        run: RunInfo::current(),
        degradation: op.mode().to_string(),
        scale: op.scale(),
        kernel_width: op.kernel().map(|k| k.width()),
        config_file_sha256: args.config.as_deref().map(sha256_file).transpose()?,
        config: cfg.to_pairs().into_iter().collect(),
        narm_backend: solver.backend_name(),
        plus: args.plus,
        images,
        seconds: t0.elapsed().as_secs_f64(),
    };
    write_json(&args.output.join("manifest.json"), &manifest)
}

fn sr_one(args: &SrArgs, solver: &Solver, path: &Path, gt_path: Option<&Path>) -> CliResult<SrEntry> {
    let t0 = Instant::now();
    let name = stem(path);
    let y = load(path)?;
    if args.gt.is_some() && gt_path.is_none() {
        log::warn!("{name}: no ground truth with this name");
    }
    let gt: Option<ImageGrid> = gt_path.map(load).transpose()?;
    let (x, channels, branches) = if args.plus {
        let out = solver.self_ensemble_traced(&y, gt.as_ref())?;
        (out.average, None, Some((out.branches, out.logs)))
    } else {
        let (x, logs) = solver.superresolve_traced(&y, gt.as_ref())?;
        (x, Some(logs), None)
    };
    if x.check_finite("reconstruction").is_err() {
        return Err(CliError::Numerical(format!("{name}: reconstruction is not finite")));
    }
    let out = args.output.join(format!("{name}.png"));
    write_image(&out, &x)?;
    let sidecar = SrLog {
        name: &name,
        channels: channels.as_deref(),
        branches: branches.as_ref().map(|b| b.1.as_slice()),
    };
    write_json(&args.output.join(format!("{name}.log.json")), &sidecar)?;
    let psnr_db = match &gt {
        Some(g) => Some(cap_psnr(psnr(&x, g, solver.op().scale())?)),
        None => None,
    };
    log::info!("{} -> {}", path.display(), out.display());
    Ok(SrEntry {
        input_sha256: sha256_file(path)?,
        output_sha256: sha256_file(&out)?,
        branch_sha256: branches.map(|b| b.0.iter().map(sha256_grid).collect()),
        gt_sha256: gt_path.map(sha256_file).transpose()?,
        psnr_db,
        seconds: t0.elapsed().as_secs_f64(),
        name,
    })
}
