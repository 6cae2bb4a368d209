//! PSNR and SSIM on the luminance channel, scaled to `[0, 255]`, after
//! cropping a border. Three-channel inputs are converted to BT.601 luma first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::degradation::make_gaussian_kernel;
use crate::error::{Error, Result};
use crate::image::{crop_border, to_luminance, ImageGrid};
use crate::io::{is_image_path, read_image};

/// Value reported in tables for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn prepare(a: &ImageGrid, b: &ImageGrid, crop: usize) -> Result<(ImageGrid, ImageGrid)> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "metric inputs differ in size: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let ya = crop_border(&to_luminance(a)?, crop)?.scale(255.0);
    let yb = crop_border(&to_luminance(b)?, crop)?.scale(255.0);
    Ok((ya, yb))
}

/// `10 log10(255^2 / MSE)`; `+inf` for identical images.
pub fn psnr(a: &ImageGrid, b: &ImageGrid, crop: usize) -> Result<f64> {
    let (ya, yb) = prepare(a, b, crop)?;
    let mse = ya.sub(&yb).norm_sq() / ya.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// PSNR with infinity replaced by [`PSNR_CAP_DB`].
pub fn psnr_capped(a: &ImageGrid, b: &ImageGrid, crop: usize) -> Result<f64> {
    psnr(a, b, crop).map(cap_psnr)
}

pub fn cap_psnr(db: f64) -> f64 {
    db.min(PSNR_CAP_DB)
}

/// Valid-region filtering with a square kernel.
fn filter_valid(img: &[f64], h: usize, w: usize, k: &[f64], n: usize) -> Vec<f64> {
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for i in 0..n {
                let row = &img[(r + i) * w + c..(r + i) * w + c + n];
                for (t, v) in k[i * n..(i + 1) * n].iter().zip(row) {
                    acc += t * v;
                }
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) and the standard
/// stabilisers `C1 = (0.01 * 255)^2`, `C2 = (0.03 * 255)^2`.
pub fn ssim(a: &ImageGrid, b: &ImageGrid, crop: usize) -> Result<f64> {
    let (ya, yb) = prepare(a, b, crop)?;
    let (h, w) = ya.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels after cropping, got {h}x{w}"
        )));
    }
    let kernel = make_gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW)?;
    let k = kernel.taps();
    let (da, db) = (ya.data(), yb.data());
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mu_a = filter_valid(da, h, w, k, SSIM_WINDOW);
    let mu_b = filter_valid(db, h, w, k, SSIM_WINDOW);
    let e_aa = filter_valid(&prod(da, da), h, w, k, SSIM_WINDOW);
    let e_bb = filter_valid(&prod(db, db), h, w, k, SSIM_WINDOW);
    let e_ab = filter_valid(&prod(da, db), h, w, k, SSIM_WINDOW);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageMetrics {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub per_image: Vec<ImageMetrics>,
    /// Mean of the capped PSNR values.
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    /// Files present in only one of the two directories.
    pub missing: Vec<String>,
}

impl MetricReport {
    pub fn from_images(per_image: Vec<ImageMetrics>, missing: Vec<String>) -> Result<Self> {
        if per_image.is_empty() {
            return Err(Error::invalid("no image pairs to evaluate"));
        }
        let n = per_image.len() as f64;
        let mean_psnr_db = per_image.iter().map(|m| cap_psnr(m.psnr_db)).sum::<f64>() / n;
        let mean_ssim = per_image.iter().map(|m| m.ssim).sum::<f64>() / n;
        Ok(MetricReport {
            per_image,
            mean_psnr_db,
            mean_ssim,
            missing,
        })
    }

    /// `name,psnr_db,ssim` rows plus a final `MEAN` row, six decimals,
    /// infinite PSNR written as the cap.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,psnr_db,ssim\n");
        for m in &self.per_image {
            let _ = writeln!(s, "{},{:.6},{:.6}", m.name, cap_psnr(m.psnr_db), m.ssim);
        }
        let _ = writeln!(s, "MEAN,{:.6},{:.6}", self.mean_psnr_db, self.mean_ssim);
        s
    }
}

fn list_images(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && is_image_path(&path) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Pairs images by file stem and scores each pair. Unpaired files are
/// reported in [`MetricReport::missing`] and excluded from the means.
pub fn evaluate_dataset(sr_dir: &Path, gt_dir: &Path, crop: usize) -> Result<MetricReport> {
    let sr = list_images(sr_dir)?;
    let gt = list_images(gt_dir)?;
    let mut missing: Vec<String> = gt
        .keys()
        .filter(|k| !sr.contains_key(*k))
        .chain(sr.keys().filter(|k| !gt.contains_key(*k)))
        .cloned()
        .collect();
    missing.sort();
    missing.dedup();
    let pairs: Vec<(&String, &std::path::PathBuf, &std::path::PathBuf)> = gt
        .iter()
        .filter_map(|(name, g)| sr.get(name).map(|s| (name, s, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::invalid(format!(
            "no matching image names between {} and {}",
            sr_dir.display(),
            gt_dir.display()
        )));
    }
    let per_image = pairs
        .par_iter()
        .map(|(name, s, g)| {
            let (a, b) = (read_image(s)?, read_image(g)?);
            Ok(ImageMetrics {
                name: (*name).clone(),
                psnr_db: psnr(&a, &b, crop)?,
                ssim: ssim(&a, &b, crop)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_images(per_image, missing)
}
