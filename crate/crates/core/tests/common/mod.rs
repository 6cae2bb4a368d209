//! Dense brute-force helpers shared by the integration tests. Everything here
//! is written from the defining formulas, independent of the library's sparse
//! and separable code paths.
#![allow(dead_code)]

pub mod narm;
pub mod solver;

use std::path::PathBuf;

use narmsr::io::read_image;
use narmsr::ImageGrid;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rand_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageGrid {
    ImageGrid::from_fn(h, w, |_, _| rng.gen::<f64>())
}

/// Symmetric extension without edge repetition: `-1 -> 1`, `n -> n - 2`.
pub fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Columns are `f(e_k)` for the unit images `e_k` of an `h x w` grid.
pub fn materialize(h: usize, w: usize, f: impl Fn(&ImageGrid) -> ImageGrid) -> Dense {
    let n = h * w;
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let e = ImageGrid::from_fn(h, w, |r, c| if r * w + c == k { 1.0 } else { 0.0 });
        cols.push(f(&e).into_data());
    }
    let m = cols[0].len();
    (0..m).map(|i| (0..n).map(|k| cols[k][i]).collect()).collect()
}

pub fn zeros(m: usize, n: usize) -> Dense {
    vec![vec![0.0; n]; m]
}

pub fn eye(n: usize) -> Dense {
    let mut a = zeros(n, n);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    a
}

pub fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return vec![];
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (m, k, n) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(m, n);
    for i in 0..m {
        for p in 0..k {
            let v = a[i][p];
            if v != 0.0 {
                for j in 0..n {
                    out[i][j] += v * b[p][j];
                }
            }
        }
    }
    out
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn add(a: &Dense, b: &Dense, beta: f64) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(p, q)| p + beta * q).collect())
        .collect()
}

pub fn scale(a: &Dense, s: f64) -> Dense {
    a.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff: Vec<f64> = got.iter().zip(want).map(|(p, q)| p - q).collect();
    norm(&diff) / norm(want).max(1e-300)
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/natural")
}

/// The bundled 64x64 grayscale crops, sorted by name.
pub fn fixtures() -> Vec<(String, ImageGrid)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .expect("fixture directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, read_image(&p).unwrap())
        })
        .collect()
}
