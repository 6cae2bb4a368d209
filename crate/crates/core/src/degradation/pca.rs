//! PCA codebook for blur kernels and the "dimensionality stretching" map.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::degradation::kernel::GaussianKernel;
use crate::error::{Error, Result};

/// Mean kernel plus `d` orthonormal principal directions in `R^{k^2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCodebook {
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl KernelCodebook {
    pub fn new(mean: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let k2 = mean.len();
        if basis.is_empty() || basis.len() >= k2 {
            return Err(Error::invalid(format!(
                "codebook dimension {} must satisfy 0 < d < k^2 = {k2}",
                basis.len()
            )));
        }
        if basis.iter().any(|row| row.len() != k2) {
            return Err(Error::invalid("codebook rows must have length k^2"));
        }
        Ok(KernelCodebook {
            mean,
            basis,
            eigenvalues: Vec::new(),
        })
    }

    pub fn k2(&self) -> usize {
        self.mean.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Covariance eigenvalues of the retained directions (empty when the
    /// codebook was loaded from a file).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Coefficients of `vec(k) - mean` in the basis.
    pub fn project(&self, kernel: &GaussianKernel) -> Result<Vec<f64>> {
        if kernel.taps().len() != self.k2() {
            return Err(Error::invalid(format!(
                "kernel has {} taps, codebook expects {}",
                kernel.taps().len(),
                self.k2()
            )));
        }
        Ok(self
            .basis
            .iter()
            .map(|row| {
                row.iter()
                    .zip(kernel.taps())
                    .zip(&self.mean)
                    .map(|((b, t), m)| b * (t - m))
                    .sum()
            })
            .collect())
    }

    /// `basis^T coeffs + mean`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (row, &a) in self.basis.iter().zip(coeffs) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += a * b;
            }
        }
        out
    }

    /// Codebook file: `k2 d` header, the mean, then `d` basis rows.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.k2(), self.dim());
        let line = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{}", line(&self.mean));
        for row in &self.basis {
            let _ = writeln!(s, "{}", line(row));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::invalid("empty codebook file"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::invalid("codebook header must be `k2 d`")))
            .collect::<Result<_>>()?;
        let [k2, d] = nums[..] else {
            return Err(Error::invalid("codebook header must be `k2 d`"));
        };
        let parse_row = |line: &str| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::invalid(format!("bad codebook value {t:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != k2 {
                return Err(Error::invalid(format!("codebook row has {} values, expected {k2}", row.len())));
            }
            Ok(row)
        };
        let mean = parse_row(lines.next().ok_or_else(|| Error::invalid("codebook missing mean"))?)?;
        let basis = lines.map(parse_row).collect::<Result<Vec<_>>>()?;
        if basis.len() != d {
            return Err(Error::invalid(format!("codebook has {} rows, header says {d}", basis.len())));
        }
        Self::new(mean, basis)
    }
}

/// Fits the top-`d` principal directions of the vectorised kernels.
///
/// Rows are ordered by descending covariance eigenvalue and signed so that
/// each row's largest-magnitude entry is positive.
pub fn pca_fit(kernels: &[GaussianKernel], d: usize) -> Result<KernelCodebook> {
    let first = kernels.first().ok_or_else(|| Error::invalid("no kernels to fit"))?;
    let k2 = first.taps().len();
    if d == 0 || d >= k2 {
        return Err(Error::invalid(format!("PCA dimension {d} must satisfy 0 < d < k^2 = {k2}")));
    }
    if kernels.len() < d.max(2) {
        return Err(Error::invalid(format!(
            "need at least {} kernels for a {d}-dimensional codebook, got {}",
            d.max(2),
            kernels.len()
        )));
    }
    if kernels.iter().any(|k| k.taps().len() != k2) {
        return Err(Error::invalid("kernels differ in size"));
    }
    let n = kernels.len() as f64;
    let mut mean = vec![0.0; k2];
    for k in kernels {
        for (m, t) in mean.iter_mut().zip(k.taps()) {
            *m += t;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let centred = DMatrix::from_fn(kernels.len(), k2, |i, j| kernels[i].taps()[j] - mean[j]);
    let cov = (centred.transpose() * &centred) / n;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k2).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut basis = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for &idx in order.iter().take(d) {
        let mut row: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        basis.push(row);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(KernelCodebook {
        mean,
        basis,
        eigenvalues,
    })
}

/// `d` planes of size `height x width`, plane `j` filled with coefficient `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct StretchMap {
    pub height: usize,
    pub width: usize,
    pub coefficients: Vec<f64>,
    planes: Vec<f64>,
}

impl StretchMap {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn plane(&self, j: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.planes[j * n..(j + 1) * n]
    }

    /// `d H W` header followed by `d * H` rows of `W` values.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.dim(), self.height, self.width);
        for j in 0..self.dim() {
            for row in self.plane(j).chunks(self.width) {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        s
    }
}

/// Projects the kernel onto the codebook and broadcasts each coefficient
/// over an `height x width` plane.
pub fn kernel_stretch(
    kernel: &GaussianKernel,
    codebook: &KernelCodebook,
    height: usize,
    width: usize,
) -> Result<StretchMap> {
    let coefficients = codebook.project(kernel)?;
    let n = height * width;
    let mut planes = Vec::with_capacity(coefficients.len() * n);
    for &c in &coefficients {
        planes.extend(std::iter::repeat_n(c, n));
    }
    Ok(StretchMap {
        height,
        width,
        coefficients,
        planes,
    })
}
