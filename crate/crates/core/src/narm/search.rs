use crate::error::{Error, Result};
use crate::image::{pad_reflect_unchecked, ImageGrid, PatchRef};
use crate::narm::NarmParams;

/// The `J` most similar patches to `center` inside its search window,
/// ascending by squared Euclidean distance.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet {
    pub center: PatchRef,
    pub neighbors: Vec<(PatchRef, f64)>,
}

/// Symmetrically padded copy of a single-channel image, so every patch
/// centred inside the image can be read without bounds juggling.
pub(crate) struct PatchTable {
    padded: Vec<f64>,
    stride: usize,
    height: usize,
    width: usize,
    size: usize,
}

impl PatchTable {
    pub(crate) fn new(img: &ImageGrid, size: usize) -> Self {
        let padded = pad_reflect_unchecked(img, size / 2);
        PatchTable {
            stride: padded.width(),
            padded: padded.into_data(),
            height: img.height(),
            width: img.width(),
            size,
        }
    }

    pub(crate) fn patch(&self, r: usize, c: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size * self.size);
        for dr in 0..self.size {
            let start = (r + dr) * self.stride + c;
            out.extend_from_slice(&self.padded[start..start + self.size]);
        }
        out
    }

    pub(crate) fn distance(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let mut acc = 0.0;
        for dr in 0..self.size {
            let ra = (a.0 + dr) * self.stride + a.1;
            let rb = (b.0 + dr) * self.stride + b.1;
            for dc in 0..self.size {
                let d = self.padded[ra + dc] - self.padded[rb + dc];
                acc += d * d;
            }
        }
        acc
    }

    /// Candidates in row-major scan order with their distances; ties are
    /// resolved toward the earlier scan position.
    pub(crate) fn nearest(&self, r: usize, c: usize, window: usize, count: usize) -> Result<Vec<(usize, usize, f64)>> {
        let rad = window / 2;
        let (r0, r1) = (r.saturating_sub(rad), (r + rad).min(self.height - 1));
        let (c0, c1) = (c.saturating_sub(rad), (c + rad).min(self.width - 1));
        let mut cands = Vec::with_capacity((r1 - r0 + 1) * (c1 - c0 + 1));
        for rr in r0..=r1 {
            for cc in c0..=c1 {
                if (rr, cc) != (r, c) {
                    cands.push((self.distance((r, c), (rr, cc)), cands.len(), rr, cc));
                }
            }
        }
        if count > cands.len() {
            return Err(Error::invalid(format!(
                "requested {count} neighbours but only {} candidates exist around ({r}, {c})",
                cands.len()
            )));
        }
        let key = |a: &(f64, usize, usize, usize), b: &(f64, usize, usize, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if count < cands.len() {
            cands.select_nth_unstable_by(count, key);
            cands.truncate(count);
        }
        cands.sort_by(key);
        Ok(cands.into_iter().map(|(d, _, rr, cc)| (rr, cc, d)).collect())
    }
}

/// Block-matching search for the nonlocal neighbours of one patch.
pub fn find_nonlocal_neighbors(img: &ImageGrid, center: PatchRef, params: &NarmParams) -> Result<NeighborSet> {
    img.require_single_channel("neighbour search")?;
    params.validate()?;
    if center.size() != params.patch_size {
        return Err(Error::invalid("patch size differs from the NARM parameters"));
    }
    if center.center_row >= img.height() || center.center_col >= img.width() {
        return Err(Error::invalid("patch centre outside the image"));
    }
    let table = PatchTable::new(img, params.patch_size);
    let found = table.nearest(center.center_row, center.center_col, params.search_window, params.neighbors)?;
    let neighbors = found
        .into_iter()
        .map(|(r, c, d)| PatchRef::new(r, c, params.patch_size).map(|p| (p, d)))
        .collect::<Result<_>>()?;
    Ok(NeighborSet { center, neighbors })
}
