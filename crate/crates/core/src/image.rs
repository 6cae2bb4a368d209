//! Floating-point raster shared by every stage of the pipeline.
//!
//! Samples are `f64`, nominally in `[0, 1]`, stored row-major with channels
//! interleaved: sample `(row, col, ch)` lives at `(row * width + col) * channels + ch`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Wraps `data`, checking the length and that every sample is finite.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {pos}")));
        }
        Ok(ImageGrid {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "unsupported channel count {channels}");
        ImageGrid {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ImageGrid {
            height,
            width,
            channels: 1,
            data: vec![value; height * width],
        }
    }

    /// Single-channel image from a closure over `(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        ImageGrid {
            height,
            width,
            channels: 1,
            data,
        }
    }

    /// Internal constructor for buffers already known to be well formed.
    pub(crate) fn from_parts(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        ImageGrid {
            height,
            width,
            channels,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.get(row, col, 0)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + ch] = value;
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &ImageGrid, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: shape {}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    pub(crate) fn require_single_channel(&self, what: &str) -> Result<()> {
        if self.channels == 1 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what} expects a single-channel image, got {} channels",
                self.channels
            )))
        }
    }

    /// Splits into one single-channel image per channel.
    pub fn split_channels(&self) -> Vec<ImageGrid> {
        if self.channels == 1 {
            return vec![self.clone()];
        }
        (0..self.channels)
            .map(|ch| {
                let data = self.data.iter().skip(ch).step_by(self.channels).copied().collect();
                ImageGrid::from_parts(self.height, self.width, 1, data)
            })
            .collect()
    }

    /// Inverse of [`split_channels`](Self::split_channels).
    pub fn merge_channels(planes: &[ImageGrid]) -> Result<ImageGrid> {
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid("no planes to merge"))?;
        if planes.len() == 1 {
            return Ok(first.clone());
        }
        for p in planes {
            p.require_single_channel("merge_channels")?;
            if p.dims() != first.dims() {
                return Err(Error::invalid("planes differ in size"));
            }
        }
        let c = planes.len();
        let mut data = vec![0.0; first.pixel_count() * c];
        for (ch, p) in planes.iter().enumerate() {
            for (i, v) in p.data.iter().enumerate() {
                data[i * c + ch] = *v;
            }
        }
        ImageGrid::new(first.height, first.width, c, data)
    }

    /// Applies `f` independently to every channel plane and re-interleaves.
    pub fn map_planes(&self, mut f: impl FnMut(&ImageGrid) -> Result<ImageGrid>) -> Result<ImageGrid> {
        if self.channels == 1 {
            return f(self);
        }
        let planes = self
            .split_channels()
            .iter()
            .map(&mut f)
            .collect::<Result<Vec<_>>>()?;
        ImageGrid::merge_channels(&planes)
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn add(&self, other: &ImageGrid) -> ImageGrid {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageGrid) -> ImageGrid {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> ImageGrid {
        self.map(|v| v * s)
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &ImageGrid) -> ImageGrid {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        ImageGrid::from_parts(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> ImageGrid {
        assert!(self.same_shape(other), "shape mismatch in elementwise op");
        ImageGrid::from_parts(
            self.height,
            self.width,
            self.channels,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn clamp01(&self) -> ImageGrid {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Fails if any sample became NaN or infinite.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical(format!("{what} produced non-finite samples")))
        }
    }
}

/// Maps any integer coordinate onto `[0, n)` by whole-sample symmetric
/// reflection (`-1 -> 1`, `n -> n - 2`), folding repeatedly for far offsets.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// RGB to BT.601 full-range luma.
pub fn rgb_to_luminance(img: &ImageGrid) -> Result<ImageGrid> {
    if img.channels != 3 {
        return Err(Error::invalid(format!(
            "luminance conversion needs 3 channels, got {}",
            img.channels
        )));
    }
    let data = img
        .data
        .chunks_exact(3)
        // written around the green channel so gray pixels map to themselves exactly
        .map(|p| p[1] + 0.299 * (p[0] - p[1]) + 0.114 * (p[2] - p[1]))
        .collect();
    Ok(ImageGrid::from_parts(img.height, img.width, 1, data))
}

/// Returns the image itself when already single-channel, otherwise its luma.
pub fn to_luminance(img: &ImageGrid) -> Result<ImageGrid> {
    match img.channels {
        1 => Ok(img.clone()),
        _ => rgb_to_luminance(img),
    }
}

/// Whole-sample symmetric padding. `margin` must be smaller than both sides.
pub fn pad_symmetric(img: &ImageGrid, margin: usize) -> Result<ImageGrid> {
    if margin >= img.height.min(img.width) && margin > 0 {
        return Err(Error::invalid(format!(
            "padding margin {margin} must be smaller than the image side {}",
            img.height.min(img.width)
        )));
    }
    Ok(pad_reflect_unchecked(img, margin))
}

/// Symmetric padding without the margin limit; far offsets fold repeatedly.
pub(crate) fn pad_reflect_unchecked(img: &ImageGrid, margin: usize) -> ImageGrid {
    let (h, w, ch) = (img.height, img.width, img.channels);
    let (ph, pw) = (h + 2 * margin, w + 2 * margin);
    let mut data = Vec::with_capacity(ph * pw * ch);
    for r in 0..ph {
        let sr = reflect_index(r as isize - margin as isize, h);
        for c in 0..pw {
            let sc = reflect_index(c as isize - margin as isize, w);
            let base = (sr * w + sc) * ch;
            data.extend_from_slice(&img.data[base..base + ch]);
        }
    }
    ImageGrid::from_parts(ph, pw, ch, data)
}

/// Removes `margin` pixels from every side.
pub fn crop_border(img: &ImageGrid, margin: usize) -> Result<ImageGrid> {
    if 2 * margin >= img.height.min(img.width) {
        return Err(Error::invalid(format!(
            "crop margin {margin} too large for {}x{} image",
            img.height, img.width
        )));
    }
    if margin == 0 {
        return Ok(img.clone());
    }
    let (h, w, ch) = (img.height - 2 * margin, img.width - 2 * margin, img.channels);
    let mut data = Vec::with_capacity(h * w * ch);
    for r in 0..h {
        let start = ((r + margin) * img.width + margin) * ch;
        data.extend_from_slice(&img.data[start..start + w * ch]);
    }
    Ok(ImageGrid::from_parts(h, w, ch, data))
}

/// A square patch of odd side centred on a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchRef {
    pub center_row: usize,
    pub center_col: usize,
    size: usize,
}

impl PatchRef {
    pub fn new(center_row: usize, center_col: usize, size: usize) -> Result<Self> {
        if size < 3 || size.is_multiple_of(2) {
            return Err(Error::invalid(format!("patch size {size} must be odd and >= 3")));
        }
        Ok(PatchRef {
            center_row,
            center_col,
            size,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }
}

/// Patch samples in row-major order (channel-interleaved when multi-channel).
/// This ordering defines the patch vectors used by the AR weight solve.
/// The patch must lie inside the image.
pub fn extract_patch(img: &ImageGrid, p: PatchRef) -> Result<Vec<f64>> {
    let r = p.radius();
    if p.center_row < r
        || p.center_col < r
        || p.center_row + r >= img.height
        || p.center_col + r >= img.width
    {
        return Err(Error::invalid(format!(
            "patch of size {} at ({}, {}) exceeds {}x{} image",
            p.size, p.center_row, p.center_col, img.height, img.width
        )));
    }
    let ch = img.channels;
    let mut out = Vec::with_capacity(p.size * p.size * ch);
    for row in p.center_row - r..=p.center_row + r {
        let start = (row * img.width + p.center_col - r) * ch;
        out.extend_from_slice(&img.data[start..start + p.size * ch]);
    }
    Ok(out)
}

/// Same as [`extract_patch`] on the symmetrically padded image, so any
/// centre inside the image is valid.
pub fn extract_patch_symmetric(img: &ImageGrid, p: PatchRef) -> Result<Vec<f64>> {
    if p.center_row >= img.height || p.center_col >= img.width {
        return Err(Error::invalid("patch centre outside the image"));
    }
    let r = p.radius() as isize;
    let ch = img.channels;
    let mut out = Vec::with_capacity(p.size * p.size * ch);
    for dr in -r..=r {
        let row = reflect_index(p.center_row as isize + dr, img.height);
        for dc in -r..=r {
            let col = reflect_index(p.center_col as isize + dc, img.width);
            let base = (row * img.width + col) * ch;
            out.extend_from_slice(&img.data[base..base + ch]);
        }
    }
    Ok(out)
}

/// One of the eight symmetries of the square: optional transpose, then
/// optional vertical and horizontal flips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dihedral {
    pub transpose: bool,
    pub flip_rows: bool,
    pub flip_cols: bool,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        transpose: false,
        flip_rows: false,
        flip_cols: false,
    };

    pub fn all() -> [Dihedral; 8] {
        let mut out = [Dihedral::IDENTITY; 8];
        for (k, d) in out.iter_mut().enumerate() {
            *d = Dihedral {
                transpose: k & 4 != 0,
                flip_rows: k & 2 != 0,
                flip_cols: k & 1 != 0,
            };
        }
        out
    }

    pub fn apply(&self, img: &ImageGrid) -> ImageGrid {
        let mut out = if self.transpose { transpose(img) } else { img.clone() };
        if self.flip_rows || self.flip_cols {
            out = flip(&out, self.flip_rows, self.flip_cols);
        }
        out
    }

    pub fn invert(&self, img: &ImageGrid) -> ImageGrid {
        let mut out = if self.flip_rows || self.flip_cols {
            flip(img, self.flip_rows, self.flip_cols)
        } else {
            img.clone()
        };
        if self.transpose {
            out = transpose(&out);
        }
        out
    }
}

fn transpose(img: &ImageGrid) -> ImageGrid {
    let (h, w, ch) = (img.height, img.width, img.channels);
    let mut data = vec![0.0; h * w * ch];
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                data[(c * h + r) * ch + k] = img.data[(r * w + c) * ch + k];
            }
        }
    }
    ImageGrid::from_parts(w, h, ch, data)
}

fn flip(img: &ImageGrid, rows: bool, cols: bool) -> ImageGrid {
    let (h, w, ch) = (img.height, img.width, img.channels);
    let mut data = vec![0.0; h * w * ch];
    for r in 0..h {
        let sr = if rows { h - 1 - r } else { r };
        for c in 0..w {
            let sc = if cols { w - 1 - c } else { c };
            for k in 0..ch {
                data[(r * w + c) * ch + k] = img.data[(sr * w + sc) * ch + k];
            }
        }
    }
    ImageGrid::from_parts(h, w, ch, data)
}
