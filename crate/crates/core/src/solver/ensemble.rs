use rayon::prelude::*;

use super::{RunLog, Solver};
use crate::error::Result;
use crate::image::{Dihedral, ImageGrid};

/// Averaged reconstruction plus the eight inverse-transformed branches, in
/// [`Dihedral::all`] order.
#[derive(Clone, Debug)]
pub struct EnsembleOutput {
    pub average: ImageGrid,
    pub branches: Vec<ImageGrid>,
    /// Per-branch, per-channel run logs.
    pub logs: Vec<Vec<RunLog>>,
}

impl Solver {
    /// Mean of the eight dihedral reconstructions of `y`.
    pub fn self_ensemble(&self, y: &ImageGrid) -> Result<ImageGrid> {
        Ok(self.self_ensemble_branches(y)?.average)
    }

    pub fn self_ensemble_branches(&self, y: &ImageGrid) -> Result<EnsembleOutput> {
        self.self_ensemble_traced(y, None)
    }

    /// Runs [`superresolve`](Self::superresolve) on every dihedral transform
    /// of `y` with a matching operator, maps each result back and averages.
    /// Branches run concurrently; the average is summed in a fixed order.
    /// Branch PSNR against `gt` is measured in the transformed frame, which
    /// gives the same value since the border crop is symmetric.
    pub fn self_ensemble_traced(&self, y: &ImageGrid, gt: Option<&ImageGrid>) -> Result<EnsembleOutput> {
        if !self.op.is_dihedral_equivariant() {
            log::warn!("blur kernel is not dihedrally symmetric; ensemble branches see different operators");
        }
        let runs = Dihedral::all()
            .par_iter()
            .map(|&t| {
                let branch = Solver {
                    op: self.op.transformed(t),
                    ..self.clone()
                };
                let gt_t = gt.map(|g| t.apply(g));
                let (x, logs) = branch.superresolve_traced(&t.apply(y), gt_t.as_ref())?;
                Ok((t.invert(&x), logs))
            })
            .collect::<Result<Vec<_>>>()?;
        let (branches, logs): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
        let mut sum = branches[0].clone();
        for b in &branches[1..] {
            sum = sum.add(b);
        }
        Ok(EnsembleOutput {
            average: sum.scale(1.0 / branches.len() as f64),
            branches,
            logs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::DegradationOp;
    use crate::solver::SolverConfig;

    #[test]
    fn symmetric_input_matches_single_run() {
        let mut cfg = SolverConfig::default();
        cfg.narm.patch_size = 3;
        cfg.narm.neighbors = 4;
        cfg.narm.search_window = 5;
        cfg.gamma_narm = 0.0;
        cfg.denoiser.kind = "gaussian".into();
        cfg.denoiser.strength = 0.7;
        let solver = Solver::new(DegradationOp::bicubic(2).unwrap(), cfg).unwrap();
        let y = ImageGrid::from_fn(6, 6, |r, c| {
            let (a, b) = (r.min(5 - r) as f64, c.min(5 - c) as f64);
            0.2 + 0.1 * (a + b) + 0.05 * a * b
        });
        let single = solver.superresolve(&y).unwrap();
        let out = solver.self_ensemble_branches(&y).unwrap();
        assert_eq!(out.branches.len(), 8);
        assert!(out.average.sub(&single).max_abs() < 1e-12);
    }
}
