//! Model-guided super-resolution built around a nonlocal auto-regressive
//! (NARM) prior and half-quadratic splitting.
//!
//! The crate is organised bottom-up:
//!
//! * [`image`] – the [`ImageGrid`] raster, symmetric padding, patches and
//!   dihedral transforms.
//! * [`io`] – PNG and binary PGM/PPM codecs.
//! * [`degradation`] – the degradation operator `A` (bicubic, direct and
//!   blur-then-decimate), its exact adjoint, Gaussian kernels and the PCA
//!   kernel codebook.
//! * [`narm`] – nonlocal neighbour search, ridge AR weights, the sparse `S`
//!   matrix and the windowed attention operator, with interchangeable
//!   [`narm::NarmBackend`]s.
//! * [`denoiser`] – plug-and-play priors behind the [`denoiser::Denoiser`]
//!   trait and a name-keyed registry.
//! * [`solver`] – the staged `v -> S -> e -> x` reconstruction, the DPDNN
//!   baseline update and the dihedral self-ensemble.
//! * [`metrics`] – PSNR/SSIM on luminance with border cropping.

pub mod degradation;
pub mod denoiser;
mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod narm;
pub mod solver;

pub use error::{Error, Result};
pub use image::{Dihedral, ImageGrid, PatchRef};
