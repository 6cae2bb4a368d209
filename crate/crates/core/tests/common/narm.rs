//! Brute-force references for neighbour search, AR weights and attention.

use narmsr::narm::{EmbeddingWeights, NarmParams};
use narmsr::ImageGrid;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

/// `(X^T X + gamma I)^{-1} X^T x` with an explicit inverse.
pub fn ar_oracle(center: &[f64], neighbors: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let j = neighbors.len();
    let mut gram = zeros(j, j);
    for a in 0..j {
        for b in 0..j {
            gram[a][b] = dot(&neighbors[a], &neighbors[b]) + if a == b { gamma } else { 0.0 };
        }
    }
    let rhs: Vec<f64> = neighbors.iter().map(|p| dot(p, center)).collect();
    matvec(&inverse(&gram), &rhs)
}

pub fn patch(img: &ImageGrid, r: usize, c: usize, size: usize) -> Vec<f64> {
    let rad = (size / 2) as isize;
    let mut out = Vec::new();
    for dr in -rad..=rad {
        for dc in -rad..=rad {
            out.push(img.at(
                mirror(r as isize + dr, img.height()),
                mirror(c as isize + dc, img.width()),
            ));
        }
    }
    out
}

/// Exhaustive scan: every candidate in the clipped window, sorted by
/// distance and then scan position.
pub fn brute_neighbors(img: &ImageGrid, r: usize, c: usize, p: &NarmParams) -> Vec<(usize, usize, f64)> {
    let rad = (p.search_window / 2) as isize;
    let centre = patch(img, r, c, p.patch_size);
    let mut cands = Vec::new();
    for rr in r as isize - rad..=r as isize + rad {
        for cc in c as isize - rad..=c as isize + rad {
            if rr < 0 || cc < 0 || rr >= img.height() as isize || cc >= img.width() as isize {
                continue;
            }
            let (rr, cc) = (rr as usize, cc as usize);
            if (rr, cc) == (r, c) {
                continue;
            }
            let q = patch(img, rr, cc, p.patch_size);
            let d: f64 = centre.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            cands.push((cands.len(), rr, cc, d));
        }
    }
    cands.sort_by(|a, b| a.3.total_cmp(&b.3).then(a.0.cmp(&b.0)));
    cands.into_iter().take(p.neighbors).map(|(_, rr, cc, d)| (rr, cc, d)).collect()
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rand_weights(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize) -> EmbeddingWeights {
    let mut m = |n| rand_vec(rng, n);
    let n = c_in * c_out;
    let (t, p, g, o) = (m(n), m(n), m(n), m(n));
    EmbeddingWeights::new(c_in, c_out, t.iter().map(|v| 2.0 * v).collect(), p, g, o).unwrap()
}

/// Direct transcription: per position, per window offset, unnormalised
/// exponentials, then division by their sum.
pub fn naive_attention(x: &ImageGrid, w: &EmbeddingWeights, q: usize) -> Vec<f64> {
    let (h, wd, ci, co) = (x.height(), x.width(), w.c_in, w.c_out);
    let px = |r: usize, c: usize| (0..ci).map(|k| x.get(r, c, k)).collect::<Vec<f64>>();
    let lin = |m: &[f64], rows: usize, cols: usize, v: &[f64]| {
        (0..rows).map(|i| (0..cols).map(|j| m[i * cols + j] * v[j]).sum()).collect::<Vec<f64>>()
    };
    let rad = (q / 2) as isize;
    let mut out = Vec::with_capacity(h * wd * ci);
    for r in 0..h {
        for c in 0..wd {
            let xi = px(r, c);
            let th = lin(&w.theta, co, ci, &xi);
            let mut num = vec![0.0; co];
            let mut den = 0.0;
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let xj = px(mirror(r as isize + dr, h), mirror(c as isize + dc, wd));
                    let f = dot(&th, &lin(&w.phi, co, ci, &xj)).exp();
                    let g = lin(&w.g, co, ci, &xj);
                    for k in 0..co {
                        num[k] += f * g[k];
                    }
                    den += f;
                }
            }
            let y: Vec<f64> = num.iter().map(|v| v / den).collect();
            let back = lin(&w.omega, ci, co, &y);
            out.extend(xi.iter().zip(back).map(|(a, b)| a + b));
        }
    }
    out
}

