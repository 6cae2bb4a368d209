use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Kernel side used throughout the multi-degradation setting.
pub const DEFAULT_KERNEL_SIZE: usize = 21;

/// Square blur kernel with nonnegative taps summing to one. Built from an
/// isotropic Gaussian, or loaded from a kernel file.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    width: f64,
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(width: f64, size: usize) -> Result<Self> {
        make_gaussian_kernel(width, size)
    }

    /// Validates externally supplied taps (row-major, `size * size`).
    pub fn from_taps(size: usize, width: f64, taps: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size {size} must be odd")));
        }
        if taps.len() != size * size {
            return Err(Error::invalid(format!(
                "kernel of size {size} needs {} taps, got {}",
                size * size,
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("kernel taps must be finite and nonnegative"));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("kernel taps sum to {sum}, expected 1")));
        }
        Ok(GaussianKernel { size, width, taps })
    }

    /// Unit impulse, the identity for convolution.
    pub fn delta(size: usize) -> Result<Self> {
        let mut taps = vec![0.0; size * size];
        if size % 2 == 1 {
            taps[size * size / 2] = 1.0;
        }
        Self::from_taps(size, 0.0, taps)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, i: usize, j: usize) -> f64 {
        self.taps[i * self.size + j]
    }

    /// True if the taps are invariant under all eight symmetries of the square
    /// (to `tol`), which makes blur commute with flips and transposes.
    pub fn is_dihedral_symmetric(&self, tol: f64) -> bool {
        let n = self.size;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let t = self.tap(i, j);
                (t - self.tap(j, i)).abs() <= tol
                    && (t - self.tap(n - 1 - i, j)).abs() <= tol
                    && (t - self.tap(i, n - 1 - j)).abs() <= tol
            })
        })
    }

    /// Kernel file: `size width` header, then `size` rows of taps.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.size, self.width);
        for row in self.taps.chunks(self.size) {
            let line: Vec<String> = row.iter().map(|t| format!("{t}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::invalid("empty kernel file"))?;
        let mut fields = header.split_whitespace();
        let size: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::invalid("kernel header: bad size"))?;
        let width: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::invalid("kernel header: bad width"))?;
        let mut taps = Vec::with_capacity(size * size);
        for line in lines {
            for tok in line.split_whitespace() {
                taps.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::invalid(format!("kernel tap {tok:?} is not a number")))?,
                );
            }
        }
        Self::from_taps(size, width, taps)
    }
}

/// Isotropic Gaussian `exp(-((i-c)^2 + (j-c)^2) / (2 width^2))`, normalised.
pub fn make_gaussian_kernel(width: f64, size: usize) -> Result<GaussianKernel> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::invalid(format!("kernel width must be positive, got {width}")));
    }
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!("kernel size {size} must be odd")));
    }
    let c = (size / 2) as f64;
    let denom = 2.0 * width * width;
    let mut taps = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            taps.push((-(di * di + dj * dj) / denom).exp());
        }
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(GaussianKernel { size, width, taps })
}
