//! Nonlocal auto-regressive modelling: each pixel's patch is regressed on its
//! most similar patches in a search window, and the regression weights become
//! the rows of a sparse matrix `S` with `x ~ S x`.
//!
//! Two constructions of `S` sit behind [`NarmBackend`]:
//! [`ClosedFormBackend`] (block matching plus ridge regression) and
//! [`AttentionBackend`] (windowed softmax attention).

mod attention;
mod matrix;
mod search;
mod weights;

use rayon::prelude::*;

pub use attention::{attention_as_s, attention_weights, nonlocal_attention, EmbeddingWeights};
pub use matrix::{apply_narm, NarmMatrix};
pub use search::{find_nonlocal_neighbors, NeighborSet};
pub use weights::solve_ar_weights;

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use search::PatchTable;

#[derive(Clone, Debug, PartialEq)]
pub struct NarmParams {
    /// Odd patch side.
    pub patch_size: usize,
    /// Neighbour count `J`.
    pub neighbors: usize,
    /// Odd side of the square search window.
    pub search_window: usize,
    /// Ridge weight of the AR regression.
    pub gamma_reg: f64,
    /// Odd attention window side.
    pub q: usize,
}

impl Default for NarmParams {
    fn default() -> Self {
        NarmParams {
            patch_size: 5,
            neighbors: 10,
            search_window: 31,
            gamma_reg: 0.05,
            q: 15,
        }
    }
}

impl NarmParams {
    pub fn validate(&self) -> Result<()> {
        let odd = |v: usize| v % 2 == 1;
        if !odd(self.patch_size) || self.patch_size < 3 {
            return Err(Error::invalid(format!("patch_size {} must be odd and >= 3", self.patch_size)));
        }
        if !odd(self.search_window) {
            return Err(Error::invalid(format!("search_window {} must be odd", self.search_window)));
        }
        if !odd(self.q) {
            return Err(Error::invalid(format!("q {} must be odd", self.q)));
        }
        if self.neighbors == 0 {
            return Err(Error::invalid("neighbors must be >= 1"));
        }
        if !(self.gamma_reg >= 0.0) {
            return Err(Error::invalid(format!("gamma_reg {} must be >= 0", self.gamma_reg)));
        }
        Ok(())
    }
}

/// Assembles `S` row by row: row `i` holds the AR weights of pixel `i`'s
/// patch over its `J` nearest neighbours, at the neighbours' centre pixels.
/// Rows are computed in parallel and collected in pixel order, so the result
/// does not depend on the thread count.
pub fn build_narm_matrix(img: &ImageGrid, params: &NarmParams) -> Result<NarmMatrix> {
    img.require_single_channel("NARM construction")?;
    params.validate()?;
    let (h, w) = img.dims();
    let table = PatchTable::new(img, params.patch_size);
    let rows = (0..h * w)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let found = table.nearest(r, c, params.search_window, params.neighbors)?;
            let center = table.patch(r, c);
            let patches: Vec<Vec<f64>> = found.iter().map(|&(rr, cc, _)| table.patch(rr, cc)).collect();
            let weights = solve_ar_weights(&center, &patches, params.gamma_reg)?;
            Ok(found
                .iter()
                .zip(weights)
                .map(|(&(rr, cc, _), wt)| (rr * w + cc, wt))
                .collect())
        })
        .collect::<Result<Vec<Vec<(usize, f64)>>>>()?;
    NarmMatrix::from_rows(h * w, rows)
}

/// A strategy for constructing `S` from the current image estimate.
pub trait NarmBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, x: &ImageGrid) -> Result<NarmMatrix>;
}

/// Block matching plus ridge-regressed AR weights.
#[derive(Clone, Debug)]
pub struct ClosedFormBackend {
    pub params: NarmParams,
}

impl NarmBackend for ClosedFormBackend {
    fn name(&self) -> &'static str {
        "closed_form"
    }

    fn build(&self, x: &ImageGrid) -> Result<NarmMatrix> {
        build_narm_matrix(x, &self.params)
    }
}

/// Softmax attention over a `q x q` window.
#[derive(Clone, Debug)]
pub struct AttentionBackend {
    pub weights: EmbeddingWeights,
    pub q: usize,
}

impl NarmBackend for AttentionBackend {
    fn name(&self) -> &'static str {
        "attention"
    }

    fn build(&self, x: &ImageGrid) -> Result<NarmMatrix> {
        attention_as_s(x, &self.weights, self.q)
    }
}

pub const BACKEND_NAMES: &[&str] = &["closed_form", "attention"];

/// Looks up an `S` construction by name. The attention backend uses
/// `weights` when given, else the uniform-averaging defaults.
pub fn backend_by_name(
    name: &str,
    params: &NarmParams,
    weights: Option<EmbeddingWeights>,
) -> Result<Box<dyn NarmBackend>> {
    params.validate()?;
    match name {
        "closed_form" | "ar" => Ok(Box::new(ClosedFormBackend {
            params: params.clone(),
        })),
        "attention" => Ok(Box::new(AttentionBackend {
            weights: weights.unwrap_or_else(|| EmbeddingWeights::uniform(1)),
            q: params.q,
        })),
        other => Err(Error::Config(format!(
            "unknown NARM backend {other:?} (known: {})",
            BACKEND_NAMES.join(", ")
        ))),
    }
}
