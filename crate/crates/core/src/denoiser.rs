//! Plug-and-play priors for the `v` sub-problem: `v = denoise(x, strength)`.
//!
//! Denoisers are stateless strategies behind the [`Denoiser`] trait and are
//! looked up by name in a [`DenoiserRegistry`]. A strength of zero is always
//! the identity.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::degradation::{convolve_symmetric, make_gaussian_kernel};
use crate::error::{Error, Result};
use crate::image::{pad_reflect_unchecked, ImageGrid};

pub trait Denoiser: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    /// Denoises a single-channel image. `strength` is nonnegative.
    fn apply(&self, x: &ImageGrid, strength: f64) -> Result<ImageGrid>;
}

/// Validating front door for every denoiser.
pub fn denoise(denoiser: &dyn Denoiser, x: &ImageGrid, strength: f64) -> Result<ImageGrid> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::invalid(format!("denoiser strength must be >= 0, got {strength}")));
    }
    x.require_single_channel("denoiser")?;
    if strength == 0.0 {
        return Ok(x.clone());
    }
    let out = denoiser.apply(x, strength)?;
    out.check_finite(denoiser.name())?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Denoiser for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn apply(&self, x: &ImageGrid, _strength: f64) -> Result<ImageGrid> {
        Ok(x.clone())
    }
}

/// Gaussian blur with standard deviation `strength` pixels.
#[derive(Clone, Copy, Debug, Default)]
pub struct GaussianSmooth;

impl Denoiser for GaussianSmooth {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn apply(&self, x: &ImageGrid, strength: f64) -> Result<ImageGrid> {
        let radius = ((3.0 * strength).ceil() as usize).max(1);
        let kernel = make_gaussian_kernel(strength, 2 * radius + 1)?;
        Ok(convolve_symmetric(x, &kernel))
    }
}

/// Classical nonlocal means. `strength` is the filtering parameter `h`
/// applied to the mean squared patch difference: `w = exp(-d^2 / h^2)`.
#[derive(Clone, Copy, Debug)]
pub struct NonlocalMeans {
    pub patch_size: usize,
    pub window: usize,
}

impl Default for NonlocalMeans {
    fn default() -> Self {
        NonlocalMeans {
            patch_size: 5,
            window: 11,
        }
    }
}

impl Denoiser for NonlocalMeans {
    fn name(&self) -> &'static str {
        "nlm"
    }

    fn apply(&self, x: &ImageGrid, strength: f64) -> Result<ImageGrid> {
        let (h, w) = x.dims();
        let pr = self.patch_size / 2;
        let sr = self.window / 2;
        let margin = pr + sr;
        let padded = pad_reflect_unchecked(x, margin);
        let pw = padded.width();
        let src = padded.data();
        let inv_h2 = 1.0 / (strength * strength);
        let inv_len = 1.0 / (self.patch_size * self.patch_size) as f64;

        let patch_dist = |a: (usize, usize), b: (usize, usize)| {
            let mut acc = 0.0;
            for d in 0..self.patch_size {
                let ra = (a.0 - pr + d) * pw + a.1 - pr;
                let rb = (b.0 - pr + d) * pw + b.1 - pr;
                for k in 0..self.patch_size {
                    let diff = src[ra + k] - src[rb + k];
                    acc += diff * diff;
                }
            }
            acc * inv_len
        };

        let out: Vec<f64> = (0..h * w)
            .into_par_iter()
            .map(|i| {
                let (r, c) = (i / w + margin, i % w + margin);
                let mut num = 0.0;
                let mut den = 0.0;
                for rr in r - sr..=r + sr {
                    for cc in c - sr..=c + sr {
                        let wt = (-patch_dist((r, c), (rr, cc)) * inv_h2).exp();
                        num += wt * src[rr * pw + cc];
                        den += wt;
                    }
                }
                num / den
            })
            .collect();
        ImageGrid::new(h, w, 1, out)
    }
}

/// Name-keyed collection of denoisers.
#[derive(Clone)]
pub struct DenoiserRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Denoiser>>,
}

impl DenoiserRegistry {
    pub fn empty() -> Self {
        DenoiserRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// `identity`, `gaussian` and `nlm`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Identity));
        reg.register(Arc::new(GaussianSmooth));
        reg.register(Arc::new(NonlocalMeans::default()));
        reg
    }

    /// Adds or replaces the entry under `denoiser.name()`.
    pub fn register(&mut self, denoiser: Arc<dyn Denoiser>) {
        self.entries.insert(denoiser.name(), denoiser);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Denoiser>> {
        let key = match name {
            "gaussian_smooth" | "gaussiansmooth" => "gaussian",
            "nonlocal_means" | "nonlocalmeans" => "nlm",
            other => other,
        };
        self.entries.get(key).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown denoiser {name:?} (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for DenoiserRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Which denoiser to use and how hard: stage `t` runs at
/// `strength * decay^t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserSpec {
    pub kind: String,
    pub strength: f64,
    pub decay: f64,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec {
            kind: "gaussian".into(),
            strength: 0.6,
            decay: 0.8,
        }
    }
}

impl DenoiserSpec {
    pub fn strength_at(&self, stage: usize) -> f64 {
        self.strength * self.decay.powi(stage as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(Error::invalid(format!("denoiser strength must be >= 0, got {}", self.strength)));
        }
        if !(self.decay > 0.0) || !self.decay.is_finite() {
            return Err(Error::invalid(format!("strength decay must be > 0, got {}", self.decay)));
        }
        Ok(())
    }
}
