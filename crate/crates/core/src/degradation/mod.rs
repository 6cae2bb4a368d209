//! The degradation operator `A` mapping a high-resolution image to its
//! low-resolution observation, together with its exact adjoint.
//!
//! Three settings are supported:
//!
//! * [`DegradationMode::Bicubic`]: antialiased Keys cubic downsampling.
//! * [`DegradationMode::Direct`]: plain decimation, no prefilter.
//! * [`DegradationMode::BlurDirect`]: convolution with a blur kernel, then
//!   decimation.
//!
//! Decimation keeps samples `(s*r + phase.0, s*c + phase.1)`; the default
//! phase is the top-left sample of each `s x s` cell. Noise is not part of
//! the operator.

mod kernel;
mod pca;
pub mod resample;

use std::fmt;
use std::str::FromStr;

pub use kernel::{make_gaussian_kernel, GaussianKernel, DEFAULT_KERNEL_SIZE};
pub use pca::{kernel_stretch, pca_fit, KernelCodebook, StretchMap};
pub use resample::{convolve_symmetric, Resample1d};

use crate::error::{Error, Result};
use crate::image::{Dihedral, ImageGrid};
use resample::{apply_separable, apply_separable_transpose, blur_sample, blur_sample_adjoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DegradationMode {
    Bicubic,
    Direct,
    BlurDirect,
}

impl DegradationMode {
    pub fn name(&self) -> &'static str {
        match self {
            DegradationMode::Bicubic => "bicubic",
            DegradationMode::Direct => "direct",
            DegradationMode::BlurDirect => "blur_direct",
        }
    }
}

impl fmt::Display for DegradationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bicubic" => Ok(DegradationMode::Bicubic),
            "direct" => Ok(DegradationMode::Direct),
            "blur_direct" | "blurdirect" => Ok(DegradationMode::BlurDirect),
            other => Err(Error::invalid(format!("unknown degradation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegradationOp {
    mode: DegradationMode,
    scale: usize,
    kernel: Option<GaussianKernel>,
    phase: (usize, usize),
}

impl DegradationOp {
    /// Checks that a kernel is present exactly when the mode needs one.
    pub fn new(mode: DegradationMode, scale: usize, kernel: Option<GaussianKernel>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale must be a positive integer"));
        }
        match (mode, &kernel) {
            (DegradationMode::BlurDirect, None) => {
                return Err(Error::Config("blur_direct degradation requires a kernel".into()))
            }
            (DegradationMode::Bicubic | DegradationMode::Direct, Some(_)) => {
                return Err(Error::Config(format!("{mode} degradation takes no kernel")))
            }
            _ => {}
        }
        Ok(DegradationOp {
            mode,
            scale,
            kernel,
            phase: (0, 0),
        })
    }

    pub fn bicubic(scale: usize) -> Result<Self> {
        Self::new(DegradationMode::Bicubic, scale, None)
    }

    pub fn direct(scale: usize) -> Result<Self> {
        Self::new(DegradationMode::Direct, scale, None)
    }

    pub fn blur_direct(scale: usize, kernel: GaussianKernel) -> Result<Self> {
        Self::new(DegradationMode::BlurDirect, scale, Some(kernel))
    }

    /// Overrides the decimation phase. Ignored by the bicubic mode.
    pub fn with_phase(mut self, row: usize, col: usize) -> Result<Self> {
        if row >= self.scale || col >= self.scale {
            return Err(Error::invalid(format!(
                "phase ({row}, {col}) must be below the scale {}",
                self.scale
            )));
        }
        self.phase = (row, col);
        Ok(self)
    }

    pub fn mode(&self) -> DegradationMode {
        self.mode
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn kernel(&self) -> Option<&GaussianKernel> {
        self.kernel.as_ref()
    }

    pub fn phase(&self) -> (usize, usize) {
        self.phase
    }

    pub fn lr_dims(&self, hr: (usize, usize)) -> (usize, usize) {
        (hr.0 / self.scale, hr.1 / self.scale)
    }

    pub fn hr_dims(&self, lr: (usize, usize)) -> (usize, usize) {
        (lr.0 * self.scale, lr.1 * self.scale)
    }

    fn check_hr(&self, x: &ImageGrid) -> Result<()> {
        let (h, w) = x.dims();
        if h < self.scale || w < self.scale {
            return Err(Error::invalid(format!(
                "{h}x{w} image is smaller than scale {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// `y = A x`, of size `floor(H/s) x floor(W/s)`.
    pub fn apply(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.check_hr(x)?;
        let (h, w) = x.dims();
        Ok(match self.mode {
            DegradationMode::Bicubic => bicubic_downsample(x, self.scale)?,
            DegradationMode::Direct => apply_separable(
                x,
                &Resample1d::decimate(h, self.scale, self.phase.0),
                &Resample1d::decimate(w, self.scale, self.phase.1),
            ),
            DegradationMode::BlurDirect => {
                let k = self.kernel.as_ref().ok_or_else(|| Error::Config("missing kernel".into()))?;
                blur_sample(x, k, self.scale, self.phase)
            }
        })
    }

    /// `A^T y` onto the high-resolution grid `hr_dims`.
    pub fn apply_adjoint(&self, y: &ImageGrid, hr_dims: (usize, usize)) -> Result<ImageGrid> {
        let (h, w) = hr_dims;
        if h < self.scale || w < self.scale || self.lr_dims(hr_dims) != y.dims() {
            return Err(Error::invalid(format!(
                "LR image {}x{} does not match HR {h}x{w} at scale {}",
                y.height(),
                y.width(),
                self.scale
            )));
        }
        Ok(match self.mode {
            DegradationMode::Bicubic => apply_separable_transpose(
                y,
                &Resample1d::bicubic_down(h, self.scale),
                &Resample1d::bicubic_down(w, self.scale),
            ),
            DegradationMode::Direct => apply_separable_transpose(
                y,
                &Resample1d::decimate(h, self.scale, self.phase.0),
                &Resample1d::decimate(w, self.scale, self.phase.1),
            ),
            DegradationMode::BlurDirect => {
                let k = self.kernel.as_ref().ok_or_else(|| Error::Config("missing kernel".into()))?;
                blur_sample_adjoint(y, k, self.scale, self.phase, hr_dims)
            }
        })
    }

    /// `A^T A x`.
    pub fn normal(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.apply_adjoint(&self.apply(x)?, x.dims())
    }

    /// Whether `A` commutes with every dihedral transform (after phase
    /// remapping, see [`DegradationOp::transformed`]).
    pub fn is_dihedral_equivariant(&self) -> bool {
        self.kernel
            .as_ref()
            .is_none_or(|k| k.is_dihedral_symmetric(1e-12))
    }

    /// The operator that maps `t(x)` to `t(A x)` for `x` whose sides are
    /// multiples of the scale. Only the decimation phase changes; the blur
    /// kernel is assumed symmetric (see
    /// [`is_dihedral_equivariant`](Self::is_dihedral_equivariant)).
    pub fn transformed(&self, t: Dihedral) -> DegradationOp {
        let s = self.scale;
        let (mut pr, mut pc) = self.phase;
        if t.transpose {
            std::mem::swap(&mut pr, &mut pc);
        }
        if t.flip_rows {
            pr = s - 1 - pr;
        }
        if t.flip_cols {
            pc = s - 1 - pc;
        }
        DegradationOp {
            phase: (pr, pc),
            ..self.clone()
        }
    }
}

fn check_scale(scale: usize) -> Result<()> {
    if scale == 0 {
        Err(Error::invalid("scale must be a positive integer"))
    } else {
        Ok(())
    }
}

/// Antialiased Keys (`a = -0.5`) downsampling to `floor(H/s) x floor(W/s)`.
pub fn bicubic_downsample(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (h, w) = img.dims();
    if h < scale || w < scale {
        return Err(Error::invalid("image smaller than the scale factor"));
    }
    Ok(apply_separable(
        img,
        &Resample1d::bicubic_down(h, scale),
        &Resample1d::bicubic_down(w, scale),
    ))
}

/// `out[r, c] = in[s r, s c]`.
pub fn direct_downsample(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (h, w) = img.dims();
    if h < scale || w < scale {
        return Err(Error::invalid("image smaller than the scale factor"));
    }
    Ok(apply_separable(
        img,
        &Resample1d::decimate(h, scale, 0),
        &Resample1d::decimate(w, scale, 0),
    ))
}

/// Cubic interpolation by an integer factor on the pixel-centre grid
/// (the conventional "bicubic" upscaler).
pub fn bicubic_upsample(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (h, w) = img.dims();
    Ok(apply_separable(
        img,
        &Resample1d::bicubic_up(h, scale),
        &Resample1d::bicubic_up(w, scale),
    ))
}
