//! Windowed embedded-Gaussian attention: a learned-free stand-in for the fast
//! nonlocal-AR block, usable either as an image operator or as a sparse `S`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::{reflect_index, ImageGrid};
use crate::narm::NarmMatrix;

/// Linear embeddings of the attention block.
///
/// `theta`, `phi` and `g` are `c_out x c_in` (row-major) and map a pixel's
/// feature vector into the embedding space; `omega` is `c_in x c_out` and
/// maps the aggregated embedding back before the residual add.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingWeights {
    pub c_in: usize,
    pub c_out: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub g: Vec<f64>,
    pub omega: Vec<f64>,
}

impl EmbeddingWeights {
    pub fn new(c_in: usize, c_out: usize, theta: Vec<f64>, phi: Vec<f64>, g: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let w = EmbeddingWeights {
            c_in,
            c_out,
            theta,
            phi,
            g,
            omega,
        };
        w.validate()?;
        Ok(w)
    }

    /// `theta = phi = 0`, `g = omega = I`: uniform averaging over the window.
    pub fn uniform(channels: usize) -> Self {
        let mut eye = vec![0.0; channels * channels];
        for i in 0..channels {
            eye[i * channels + i] = 1.0;
        }
        EmbeddingWeights {
            c_in: channels,
            c_out: channels,
            theta: vec![0.0; channels * channels],
            phi: vec![0.0; channels * channels],
            g: eye.clone(),
            omega: eye,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.c_in * self.c_out;
        if self.c_in == 0 || self.c_out == 0 {
            return Err(Error::invalid("embedding dimensions must be positive"));
        }
        for (name, m) in [("theta", &self.theta), ("phi", &self.phi), ("g", &self.g), ("omega", &self.omega)] {
            if m.len() != n {
                return Err(Error::invalid(format!("W_{name} needs {n} entries, got {}", m.len())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("W_{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// `c_in c_out` header, then theta, phi, g (each `c_out` rows of `c_in`)
    /// and omega (`c_in` rows of `c_out`).
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.c_in, self.c_out);
        let mut dump = |m: &[f64], cols: usize| {
            for row in m.chunks(cols) {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        };
        dump(&self.theta, self.c_in);
        dump(&self.phi, self.c_in);
        dump(&self.g, self.c_in);
        dump(&self.omega, self.c_out);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::invalid(format!("embedding header: bad {what}")))
        };
        let c_in = next_usize("c_in")?;
        let c_out = next_usize("c_out")?;
        let values: Vec<f64> = text
            .split_whitespace()
            .skip(2)
            .map(|t| t.parse().map_err(|_| Error::invalid(format!("bad embedding value {t:?}"))))
            .collect::<Result<_>>()?;
        let n = c_in * c_out;
        if values.len() != 4 * n {
            return Err(Error::invalid(format!("embedding file has {} values, expected {}", values.len(), 4 * n)));
        }
        Self::new(
            c_in,
            c_out,
            values[..n].to_vec(),
            values[n..2 * n].to_vec(),
            values[2 * n..3 * n].to_vec(),
            values[3 * n..].to_vec(),
        )
    }
}

fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn check_window(q: usize) -> Result<()> {
    if q == 0 || q.is_multiple_of(2) {
        return Err(Error::invalid(format!("attention window q = {q} must be odd")));
    }
    Ok(())
}

struct Embedded {
    theta: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

fn embed(x: &ImageGrid, w: &EmbeddingWeights) -> Result<Embedded> {
    w.validate()?;
    if x.channels() != w.c_in {
        return Err(Error::invalid(format!(
            "image has {} channels, embedding expects {}",
            x.channels(),
            w.c_in
        )));
    }
    let pixels: Vec<&[f64]> = x.data().chunks(w.c_in).collect();
    let map = |m: &[f64]| pixels.iter().map(|p| matvec(m, w.c_out, w.c_in, p)).collect();
    Ok(Embedded {
        theta: map(&w.theta),
        phi: map(&w.phi),
        g: map(&w.g),
    })
}

/// Softmax weights of pixel `(r, c)` over its `q x q` window, as
/// `(pixel index, weight)` in window scan order. Window positions falling off
/// the image are reflected, so an index can repeat.
fn window_softmax(emb: &Embedded, dims: (usize, usize), q: usize, r: usize, c: usize) -> Vec<(usize, f64)> {
    let (h, w) = dims;
    let rad = (q / 2) as isize;
    let ti = &emb.theta[r * w + c];
    let mut entries = Vec::with_capacity(q * q);
    for dr in -rad..=rad {
        let rr = reflect_index(r as isize + dr, h);
        for dc in -rad..=rad {
            let cc = reflect_index(c as isize + dc, w);
            let j = rr * w + cc;
            let logit: f64 = ti.iter().zip(&emb.phi[j]).map(|(a, b)| a * b).sum();
            entries.push((j, logit));
        }
    }
    let max = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for e in entries.iter_mut() {
        e.1 = (e.1 - max).exp();
        total += e.1;
    }
    for e in entries.iter_mut() {
        e.1 /= total;
    }
    entries
}

/// Softmax attention weights for one output position; they are nonnegative
/// and sum to one.
pub fn attention_weights(x: &ImageGrid, w: &EmbeddingWeights, q: usize, row: usize, col: usize) -> Result<Vec<(usize, f64)>> {
    check_window(q)?;
    if row >= x.height() || col >= x.width() {
        return Err(Error::invalid("position outside the image"));
    }
    let emb = embed(x, w)?;
    Ok(window_softmax(&emb, x.dims(), q, row, col))
}

/// `out_i = W_omega * sum_j softmax_j(theta(x_i) . phi(x_j)) g(x_j) + x_i`
/// with `j` restricted to the `q x q` window around `i`.
pub fn nonlocal_attention(x: &ImageGrid, w: &EmbeddingWeights, q: usize) -> Result<ImageGrid> {
    check_window(q)?;
    let emb = embed(x, w)?;
    let (h, wd) = x.dims();
    let c = w.c_in;
    let mut out = x.data().to_vec();
    for r in 0..h {
        for col in 0..wd {
            let i = r * wd + col;
            let mut agg = vec![0.0; w.c_out];
            for (j, a) in window_softmax(&emb, (h, wd), q, r, col) {
                for (acc, gv) in agg.iter_mut().zip(&emb.g[j]) {
                    *acc += a * gv;
                }
            }
            let back = matvec(&w.omega, w.c_in, w.c_out, &agg);
            for k in 0..c {
                out[i * c + k] += back[k];
            }
        }
    }
    ImageGrid::new(h, wd, c, out)
}

/// The attention operator without its residual, as a sparse matrix:
/// `S x = nonlocal_attention(x) - x` for the `x` the weights were computed on.
/// Requires scalar embeddings (`c_in = c_out = 1`).
pub fn attention_as_s(x: &ImageGrid, w: &EmbeddingWeights, q: usize) -> Result<NarmMatrix> {
    check_window(q)?;
    if w.c_in != 1 || w.c_out != 1 || x.channels() != 1 {
        return Err(Error::Unsupported(
            "attention-based S needs a single-channel image and scalar embeddings".into(),
        ));
    }
    let emb = embed(x, w)?;
    let gain = w.omega[0] * w.g[0];
    let (h, wd) = x.dims();
    let rows = (0..h * wd)
        .map(|i| {
            window_softmax(&emb, (h, wd), q, i / wd, i % wd)
                .into_iter()
                .map(|(j, a)| (j, gain * a))
                .collect()
        })
        .collect();
    NarmMatrix::from_rows(h * wd, rows)
}
