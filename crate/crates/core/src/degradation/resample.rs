//! Separable 1-D resampling matrices and 2-D blur, each with an exact
//! transpose. Boundaries use whole-sample symmetric reflection; reflected taps
//! are folded onto the sample they alias so the transpose stays exact.

use crate::degradation::kernel::GaussianKernel;
use crate::image::{reflect_index, ImageGrid};

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let ax = x.abs();
    if ax <= 1.0 {
        ((A + 2.0) * ax - (A + 3.0)) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((A * ax - 5.0 * A) * ax + 8.0 * A) * ax - 4.0 * A
    } else {
        0.0
    }
}

/// Sparse `n_out x n_in` matrix acting along one image axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Resample1d {
    n_in: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Resample1d {
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    fn push_tap(row: &mut Vec<(usize, f64)>, idx: usize, w: f64) {
        match row.iter_mut().find(|(i, _)| *i == idx) {
            Some(entry) => entry.1 += w,
            None => row.push((idx, w)),
        }
    }

    fn from_weights(n_in: usize, n_out: usize, mut taps_for: impl FnMut(usize) -> Vec<(isize, f64)>) -> Self {
        let rows = (0..n_out)
            .map(|o| {
                let taps = taps_for(o);
                let total: f64 = taps.iter().map(|t| t.1).sum();
                let mut row = Vec::with_capacity(taps.len());
                for (i, w) in taps {
                    if w != 0.0 {
                        Self::push_tap(&mut row, reflect_index(i, n_in), w / total);
                    }
                }
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        Resample1d { n_in, rows }
    }

    /// Antialiased cubic downsampling by an integer factor: output sample `o`
    /// sits at input coordinate `(o + 0.5) s - 0.5`, the kernel is stretched by
    /// `s`, and weights are normalised to sum to one.
    pub fn bicubic_down(n_in: usize, scale: usize) -> Self {
        let s = scale as f64;
        let n_out = n_in / scale;
        Self::from_weights(n_in, n_out, |o| {
            let u = (o as f64 + 0.5) * s - 0.5;
            let lo = (u - 2.0 * s).floor() as isize;
            let hi = (u + 2.0 * s).ceil() as isize;
            (lo..=hi).map(|i| (i, cubic((u - i as f64) / s))).collect()
        })
    }

    /// Cubic interpolation to `n_in * scale` samples on the pixel-centre grid.
    pub fn bicubic_up(n_in: usize, scale: usize) -> Self {
        let s = scale as f64;
        Self::from_weights(n_in, n_in * scale, |o| {
            let u = (o as f64 + 0.5) / s - 0.5;
            let base = u.floor() as isize;
            (base - 1..=base + 2).map(|i| (i, cubic(u - i as f64))).collect()
        })
    }

    /// Picks every `scale`-th sample starting at `phase`.
    pub fn decimate(n_in: usize, scale: usize, phase: usize) -> Self {
        debug_assert!(phase < scale.max(1));
        let rows = (0..n_in / scale).map(|o| vec![(o * scale + phase, 1.0)]).collect();
        Resample1d { n_in, rows }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect()
    }
}

/// `out = R_rows * img * R_cols^T`, per channel.
pub fn apply_separable(img: &ImageGrid, rows: &Resample1d, cols: &Resample1d) -> ImageGrid {
    assert_eq!(img.height(), rows.n_in());
    assert_eq!(img.width(), cols.n_in());
    let ch = img.channels();
    let h = img.height();
    let (oh, ow) = (rows.n_out(), cols.n_out());
    // horizontal pass
    let mut tmp = vec![0.0; h * ow * ch];
    for r in 0..h {
        for (oc, taps) in cols.rows().iter().enumerate() {
            for k in 0..ch {
                let mut acc = 0.0;
                for &(c, wt) in taps {
                    acc += wt * img.get(r, c, k);
                }
                tmp[(r * ow + oc) * ch + k] = acc;
            }
        }
    }
    let mut out = vec![0.0; oh * ow * ch];
    for (or, taps) in rows.rows().iter().enumerate() {
        for oc in 0..ow {
            for k in 0..ch {
                let mut acc = 0.0;
                for &(r, wt) in taps {
                    acc += wt * tmp[(r * ow + oc) * ch + k];
                }
                out[(or * ow + oc) * ch + k] = acc;
            }
        }
    }
    ImageGrid::from_parts(oh, ow, ch, out)
}

/// Exact transpose of [`apply_separable`]: `R_rows^T * img * R_cols`.
pub fn apply_separable_transpose(img: &ImageGrid, rows: &Resample1d, cols: &Resample1d) -> ImageGrid {
    assert_eq!(img.height(), rows.n_out());
    assert_eq!(img.width(), cols.n_out());
    let ch = img.channels();
    let (h, w) = (rows.n_in(), cols.n_in());
    let ow = cols.n_out();
    let mut tmp = vec![0.0; h * ow * ch];
    for (or, taps) in rows.rows().iter().enumerate() {
        for &(r, wt) in taps {
            for oc in 0..ow {
                for k in 0..ch {
                    tmp[(r * ow + oc) * ch + k] += wt * img.get(or, oc, k);
                }
            }
        }
    }
    let mut out = vec![0.0; h * w * ch];
    for r in 0..h {
        for (oc, taps) in cols.rows().iter().enumerate() {
            for &(c, wt) in taps {
                for k in 0..ch {
                    out[(r * w + c) * ch + k] += wt * tmp[(r * ow + oc) * ch + k];
                }
            }
        }
    }
    ImageGrid::from_parts(h, w, ch, out)
}

/// Convolution with `kernel` under symmetric boundary, evaluated only at
/// output positions `(scale * r + phase.0, scale * c + phase.1)`.
/// With `scale == 1` and zero phase this is the full blurred image.
pub fn blur_sample(img: &ImageGrid, kernel: &GaussianKernel, scale: usize, phase: (usize, usize)) -> ImageGrid {
    let (h, w) = img.dims();
    let ch = img.channels();
    let (oh, ow) = (h / scale, w / scale);
    let n = kernel.size();
    let rad = kernel.radius() as isize;
    let mut out = vec![0.0; oh * ow * ch];
    for orow in 0..oh {
        let r = (orow * scale + phase.0) as isize;
        for ocol in 0..ow {
            let c = (ocol * scale + phase.1) as isize;
            let base = (orow * ow + ocol) * ch;
            for i in 0..n {
                let sr = reflect_index(r + rad - i as isize, h);
                for j in 0..n {
                    let t = kernel.tap(i, j);
                    if t == 0.0 {
                        continue;
                    }
                    let sc = reflect_index(c + rad - j as isize, w);
                    for k in 0..ch {
                        out[base + k] += t * img.get(sr, sc, k);
                    }
                }
            }
        }
    }
    ImageGrid::from_parts(oh, ow, ch, out)
}

/// Exact transpose of [`blur_sample`] onto an `hr_dims` image.
pub fn blur_sample_adjoint(
    y: &ImageGrid,
    kernel: &GaussianKernel,
    scale: usize,
    phase: (usize, usize),
    hr_dims: (usize, usize),
) -> ImageGrid {
    let (h, w) = hr_dims;
    let ch = y.channels();
    let n = kernel.size();
    let rad = kernel.radius() as isize;
    let mut out = vec![0.0; h * w * ch];
    for orow in 0..y.height() {
        let r = (orow * scale + phase.0) as isize;
        for ocol in 0..y.width() {
            let c = (ocol * scale + phase.1) as isize;
            for i in 0..n {
                let sr = reflect_index(r + rad - i as isize, h);
                for j in 0..n {
                    let t = kernel.tap(i, j);
                    if t == 0.0 {
                        continue;
                    }
                    let sc = reflect_index(c + rad - j as isize, w);
                    for k in 0..ch {
                        out[(sr * w + sc) * ch + k] += t * y.get(orow, ocol, k);
                    }
                }
            }
        }
    }
    ImageGrid::from_parts(h, w, ch, out)
}

/// Full-resolution blur (symmetric boundary).
pub fn convolve_symmetric(img: &ImageGrid, kernel: &GaussianKernel) -> ImageGrid {
    blur_sample(img, kernel, 1, (0, 0))
}
