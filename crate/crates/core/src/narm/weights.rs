use crate::error::{Error, Result};

/// Ridge-regularised AR weights `w = (X^T X + gamma I)^{-1} X^T x`, where the
/// columns of `X` are the neighbour patches.
///
/// The normal equations are solved by Cholesky factorisation; a pivot that
/// collapses relative to the Gram diagonal is reported as ill-conditioned.
pub fn solve_ar_weights<P: AsRef<[f64]>>(center: &[f64], neighbors: &[P], gamma_reg: f64) -> Result<Vec<f64>> {
    if !(gamma_reg >= 0.0) || !gamma_reg.is_finite() {
        return Err(Error::invalid(format!("gamma_reg must be >= 0, got {gamma_reg}")));
    }
    let j = neighbors.len();
    if j == 0 {
        return Err(Error::invalid("at least one neighbour patch is required"));
    }
    let dim = center.len();
    if neighbors.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::invalid("neighbour patches must match the centre patch length"));
    }

    let mut gram = vec![0.0; j * j];
    let mut rhs = vec![0.0; j];
    for a in 0..j {
        let pa = neighbors[a].as_ref();
        rhs[a] = dot(pa, center);
        for b in 0..=a {
            let g = dot(pa, neighbors[b].as_ref());
            gram[a * j + b] = g;
            gram[b * j + a] = g;
        }
        gram[a * j + a] += gamma_reg;
    }

    let scale = (0..j).map(|a| gram[a * j + a]).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let lower = cholesky(&gram, j, tol).ok_or_else(|| {
        Error::IllConditioned(format!(
            "neighbour Gram matrix is singular at gamma_reg = {gamma_reg}; use gamma_reg > 0"
        ))
    })?;

    // L z = rhs, then L^T w = z
    let mut z = rhs;
    for a in 0..j {
        let mut acc = z[a];
        for b in 0..a {
            acc -= lower[a * j + b] * z[b];
        }
        z[a] = acc / lower[a * j + a];
    }
    for a in (0..j).rev() {
        let mut acc = z[a];
        for b in a + 1..j {
            acc -= lower[b * j + a] * z[b];
        }
        z[a] = acc / lower[a * j + a];
    }
    Ok(z)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cholesky(m: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..=i {
            let mut acc = m[i * n + k];
            for p in 0..k {
                acc -= l[i * n + p] * l[k * n + p];
            }
            if i == k {
                if acc <= tol {
                    return None;
                }
                l[i * n + i] = acc.sqrt();
            } else {
                l[i * n + k] = acc / l[k * n + k];
            }
        }
    }
    Some(l)
}
