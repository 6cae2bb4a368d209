use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Sparse row-compressed `n x n` matrix of nonlocal AR weights over the
/// pixels of a single-channel image (pixel index `row * width + col`).
#[derive(Clone, Debug, PartialEq)]
pub struct NarmMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NarmMatrix {
    /// The all-zero matrix.
    pub fn zero(n: usize) -> Self {
        NarmMatrix {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from per-row `(column, weight)` lists. Columns repeated within a
    /// row are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::invalid(format!("expected {n} rows, got {}", rows.len())));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if c >= n {
                    return Err(Error::invalid(format!("column {c} out of range for n = {n}")));
                }
                if !v.is_finite() {
                    return Err(Error::Numerical("non-finite NARM weight".into()));
                }
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(NarmMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and weights of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    fn check(&self, x: &ImageGrid) -> Result<()> {
        x.require_single_channel("NARM product")?;
        if x.pixel_count() != self.n {
            return Err(Error::invalid(format!(
                "NARM matrix has n = {}, image has {} pixels",
                self.n,
                x.pixel_count()
            )));
        }
        Ok(())
    }

    /// `S x`.
    pub fn apply(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.check(x)?;
        let src = x.data();
        let out = (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &w)| w * src[j]).sum()
            })
            .collect();
        Ok(ImageGrid::from_parts(x.height(), x.width(), 1, out))
    }

    /// `S^T x`.
    pub fn apply_transpose(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.check(x)?;
        let src = x.data();
        let mut out = vec![0.0; self.n];
        for (i, &xi) in src.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &w) in c.iter().zip(v) {
                out[j] += w * xi;
            }
        }
        Ok(ImageGrid::from_parts(x.height(), x.width(), 1, out))
    }

    /// Dense row-major copy, for small-size checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &w) in c.iter().zip(v) {
                row[j] = w;
            }
        }
        dense
    }
}

/// `S x` for an image; see [`NarmMatrix::apply`].
pub fn apply_narm(s: &NarmMatrix, x: &ImageGrid) -> Result<ImageGrid> {
    s.apply(x)
}
