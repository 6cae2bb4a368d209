//! Staged NARM half-quadratic-splitting reconstruction.
//!
//! Each stage minimises, one gradient step at a time,
//!
//! ```text
//! ||y - A x||^2 + mu ||y - A(x + e)||^2 + gamma ||S x - (x + e)||^2 + eta ||x - v||^2
//! ```
//!
//! alternating `v <- denoise(x)`, `S <- build(x)`, a step on `e` and a step on
//! `x`. `S` is frozen within a stage. The gradient "brackets" used below are
//! half the gradients of that objective.

mod config;
mod ensemble;

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{SolverConfig, SolverMode, StepSize, CONFIG_KEYS};
pub use ensemble::EnsembleOutput;

use crate::degradation::{bicubic_upsample, DegradationOp};
use crate::denoiser::{denoise, Denoiser, DenoiserRegistry};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::metrics::{cap_psnr, psnr};
use crate::narm::{backend_by_name, EmbeddingWeights, NarmBackend, NarmMatrix};

/// Iterates of one stage.
#[derive(Clone, Debug)]
pub struct StageState {
    /// Current high-resolution estimate.
    pub x: ImageGrid,
    /// Denoised auxiliary variable.
    pub v: ImageGrid,
    /// AR modelling error, `S x ~ x + e`.
    pub e: ImageGrid,
    pub s: NarmMatrix,
    pub stage_index: usize,
    pub steps: StepSizes,
    s_current: bool,
}

impl StageState {
    /// Assembles a state from explicit parts; `s` is treated as current for `x`.
    pub fn from_parts(x: ImageGrid, v: ImageGrid, e: ImageGrid, s: NarmMatrix, steps: StepSizes) -> Result<Self> {
        x.require_single_channel("solver state")?;
        x.check_same_shape(&v, "v")?;
        x.check_same_shape(&e, "e")?;
        if s.n() != x.pixel_count() {
            return Err(Error::invalid("S does not match the image size"));
        }
        Ok(StageState {
            x,
            v,
            e,
            s,
            stage_index: 0,
            steps,
            s_current: true,
        })
    }
}

/// Resolved step sizes and the Lipschitz estimate they came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepSizes {
    pub delta: f64,
    pub delta_prime: f64,
    pub lipschitz: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StageLog {
    pub stage: usize,
    pub strength: f64,
    pub objective: f64,
    pub psnr_db: Option<f64>,
    pub seconds: f64,
}

/// Per-run record written next to each output.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunLog {
    pub init_objective: f64,
    pub init_psnr_db: Option<f64>,
    pub lipschitz: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub stages: Vec<StageLog>,
    /// Largest distance of the unclamped output from `[0, 1]`.
    pub overshoot: f64,
    pub seconds: f64,
}

/// Largest eigenvalue of a symmetric positive semi-definite operator by
/// power iteration from a fixed pseudo-random start.
pub fn power_iteration(
    dims: (usize, usize),
    iterations: usize,
    apply: impl Fn(&ImageGrid) -> Result<ImageGrid>,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = ImageGrid::from_fn(dims.0, dims.1, |_, _| rng.gen::<f64>() + 0.5);
    v = v.scale(1.0 / v.norm());
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let w = apply(&v)?;
        lambda = v.dot(&w);
        let n = w.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        v = w.scale(1.0 / n);
    }
    Ok(lambda)
}

/// The reconstruction engine: an operator, a configuration and the resolved
/// denoiser and `S` strategies.
#[derive(Clone)]
pub struct Solver {
    op: DegradationOp,
    cfg: SolverConfig,
    denoiser: Arc<dyn Denoiser>,
    backend: Arc<dyn NarmBackend>,
}

impl Solver {
    pub fn new(op: DegradationOp, cfg: SolverConfig) -> Result<Self> {
        Self::with_registry(op, cfg, &DenoiserRegistry::with_builtins())
    }

    pub fn with_registry(op: DegradationOp, cfg: SolverConfig, registry: &DenoiserRegistry) -> Result<Self> {
        cfg.validate()?;
        let denoiser = registry.get(&cfg.denoiser.kind)?;
        let weights = match &cfg.embedding_weights {
            Some(path) => Some(EmbeddingWeights::from_text(&std::fs::read_to_string(path)?)?),
            None => None,
        };
        let backend: Arc<dyn NarmBackend> = backend_by_name(&cfg.narm_backend, &cfg.narm, weights)?.into();
        Ok(Solver {
            op,
            cfg,
            denoiser,
            backend,
        })
    }

    /// Replaces the `S` construction strategy.
    pub fn with_backend(mut self, backend: Arc<dyn NarmBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn op(&self) -> &DegradationOp {
        &self.op
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    fn uses_narm(&self) -> bool {
        self.cfg.mode == SolverMode::Mog && self.cfg.gamma_narm > 0.0
    }

    fn build_s(&self, x: &ImageGrid) -> Result<NarmMatrix> {
        if self.uses_narm() {
            self.backend.build(x)
        } else {
            // S only enters through gamma-weighted terms
            Ok(NarmMatrix::zero(x.pixel_count()))
        }
    }

    /// `(I - S)^T (I - S) z`.
    fn narm_normal(s: &NarmMatrix, z: &ImageGrid) -> Result<ImageGrid> {
        let r = z.sub(&s.apply(z)?);
        Ok(r.sub(&s.apply_transpose(&r)?))
    }

    /// Largest eigenvalue of the `x` bracket's Hessian half,
    /// `(1 + mu) A^T A + gamma (I - S)^T (I - S) + eta I`.
    pub fn lipschitz_x(&self, s: &NarmMatrix, dims: (usize, usize), iterations: usize) -> Result<f64> {
        let (mu, gamma, eta) = self.effective_weights();
        power_iteration(dims, iterations, |z| {
            let mut out = self.op.normal(z)?.scale(1.0 + mu).add_scaled(eta, z);
            if gamma > 0.0 {
                out = out.add_scaled(gamma, &Self::narm_normal(s, z)?);
            }
            Ok(out)
        })
    }

    /// Largest eigenvalue of `mu A^T A + gamma I`.
    pub fn lipschitz_e(&self, dims: (usize, usize), iterations: usize) -> Result<f64> {
        let (mu, gamma, _) = self.effective_weights();
        if mu == 0.0 {
            return Ok(gamma);
        }
        Ok(mu * power_iteration(dims, iterations, |z| self.op.normal(z))? + gamma)
    }

    /// `(mu, gamma, eta)` as seen by the active mode.
    fn effective_weights(&self) -> (f64, f64, f64) {
        match self.cfg.mode {
            SolverMode::Mog => (self.cfg.mu, self.cfg.gamma_narm, self.cfg.eta),
            SolverMode::Dpdnn => (0.0, 0.0, self.cfg.eta),
        }
    }

    fn resolve_steps(&self, s: &NarmMatrix, dims: (usize, usize)) -> Result<StepSizes> {
        let needs_l = matches!(self.cfg.delta, StepSize::Auto) || matches!(self.cfg.delta_prime, StepSize::Auto);
        let lipschitz = if needs_l {
            let it = self.cfg.power_iterations;
            self.lipschitz_x(s, dims, it)?.max(self.lipschitz_e(dims, it)?)
        } else {
            0.0
        };
        let auto = if lipschitz > 0.0 {
            self.cfg.step_fraction / lipschitz
        } else {
            0.0
        };
        let pick = |s: StepSize| match s {
            StepSize::Auto => auto,
            StepSize::Fixed(v) => v,
        };
        Ok(StepSizes {
            delta: pick(self.cfg.delta),
            delta_prime: pick(self.cfg.delta_prime),
            lipschitz,
        })
    }

    fn check_observation(&self, y: &ImageGrid) -> Result<(usize, usize)> {
        y.require_single_channel("solver")?;
        if y.height() == 0 || y.width() == 0 {
            return Err(Error::invalid("empty observation"));
        }
        Ok(self.op.hr_dims(y.dims()))
    }

    /// `x0` = bicubic upsampling of `y`, `v0 = x0`, `e0 = 0`, `S` from `x0`,
    /// and step sizes from power iteration on the composite operators.
    pub fn init_state(&self, y: &ImageGrid) -> Result<StageState> {
        let hr = self.check_observation(y)?;
        let x = bicubic_upsample(y, self.op.scale())?;
        debug_assert_eq!(x.dims(), hr);
        let s = self.build_s(&x)?;
        let steps = self.resolve_steps(&s, hr)?;
        Ok(StageState {
            v: x.clone(),
            e: ImageGrid::zeros(hr.0, hr.1, 1),
            x,
            s,
            stage_index: 0,
            steps,
            s_current: true,
        })
    }

    fn residual(&self, z: &ImageGrid, y: &ImageGrid) -> Result<ImageGrid> {
        Ok(self.op.apply(z)?.sub(y))
    }

    /// `mu A^T (A(x + e) - y) + gamma (x + e - S x)`.
    pub fn gradient_e(&self, state: &StageState, y: &ImageGrid) -> Result<ImageGrid> {
        let (mu, gamma, _) = self.effective_weights();
        let xe = state.x.add(&state.e);
        let data = self.op.apply_adjoint(&self.residual(&xe, y)?, xe.dims())?;
        let narm = xe.sub(&state.s.apply(&state.x)?);
        Ok(data.scale(mu).add_scaled(gamma, &narm))
    }

    /// `A^T (A x - y) + mu A^T (A(x + e) - y) + gamma (I - S)^T (x + e - S x) + eta (x - v)`.
    pub fn gradient_x(&self, state: &StageState, y: &ImageGrid) -> Result<ImageGrid> {
        let (mu, gamma, eta) = self.effective_weights();
        let x = &state.x;
        let dims = x.dims();
        let mut g = self.op.apply_adjoint(&self.residual(x, y)?, dims)?;
        if mu != 0.0 {
            let shifted = if self.cfg.printed_e_sign {
                x.sub(&state.e)
            } else {
                x.add(&state.e)
            };
            g = g.add_scaled(mu, &self.op.apply_adjoint(&self.residual(&shifted, y)?, dims)?);
        }
        if gamma != 0.0 {
            let r = x.add(&state.e).sub(&state.s.apply(x)?);
            let back = r.sub(&state.s.apply_transpose(&r)?);
            g = g.add_scaled(gamma, &back);
        }
        Ok(g.add_scaled(eta, &x.sub(&state.v)))
    }

    /// `inner_e_steps` gradient steps on `e` with `x`, `S` fixed.
    pub fn update_e(&self, state: &StageState, y: &ImageGrid) -> Result<ImageGrid> {
        let mut work = state.clone();
        for _ in 0..self.cfg.inner_e_steps {
            let g = self.gradient_e(&work, y)?;
            work.e = work.e.add_scaled(-work.steps.delta, &g);
        }
        work.e.check_finite("e update")?;
        Ok(work.e)
    }

    /// `inner_x_steps` gradient steps on `x` with `e`, `v`, `S` fixed.
    pub fn update_x(&self, state: &StageState, y: &ImageGrid) -> Result<ImageGrid> {
        let mut work = state.clone();
        for _ in 0..self.cfg.inner_x_steps {
            let g = self.gradient_x(&work, y)?;
            work.x = work.x.add_scaled(-work.steps.delta_prime, &g);
        }
        work.x.check_finite("x update")?;
        Ok(work.x)
    }

    /// `x <- [(1 - d eta) I - d A^T A] x + d A^T y + d eta v` with `d` the
    /// `x` step size.
    pub fn update_x_dpdnn(&self, state: &StageState, y: &ImageGrid) -> Result<ImageGrid> {
        let d = state.steps.delta_prime;
        let eta = self.cfg.eta;
        let x = &state.x;
        let dims = x.dims();
        let propagated = x.scale(1.0 - d * eta).add_scaled(-d, &self.op.normal(x)?);
        let out = propagated
            .add_scaled(d, &self.op.apply_adjoint(y, dims)?)
            .add_scaled(d * eta, &state.v);
        out.check_finite("x update")?;
        Ok(out)
    }

    /// `||y - A x||^2 + mu ||y - A(x + e)||^2 + gamma ||S x - (x + e)||^2 + eta ||x - v||^2`.
    pub fn objective_value(&self, state: &StageState, y: &ImageGrid) -> Result<f64> {
        let (mu, gamma, eta) = self.effective_weights();
        let xe = state.x.add(&state.e);
        let data = self.residual(&state.x, y)?.norm_sq();
        let corrected = self.residual(&xe, y)?.norm_sq();
        let narm = state.s.apply(&state.x)?.sub(&xe).norm_sq();
        let split = state.x.sub(&state.v).norm_sq();
        Ok(data + mu * corrected + gamma * narm + eta * split)
    }

    /// One `v -> S -> e -> x` stage.
    pub fn run_stage(&self, state: &StageState, y: &ImageGrid) -> Result<StageState> {
        let strength = self.cfg.denoiser.strength_at(state.stage_index);
        let mut next = state.clone();
        next.v = denoise(self.denoiser.as_ref(), &state.x, strength)?;
        match self.cfg.mode {
            SolverMode::Mog => {
                if !next.s_current {
                    next.s = self.build_s(&next.x)?;
                }
                next.e = self.update_e(&next, y)?;
                next.x = self.update_x(&next, y)?;
            }
            SolverMode::Dpdnn => {
                next.x = self.update_x_dpdnn(&next, y)?;
            }
        }
        next.s_current = false;
        next.stage_index += 1;
        Ok(next)
    }

    /// `init_state` followed by `stages` stages; the result is clamped to
    /// `[0, 1]`. Three-channel inputs are solved per channel.
    pub fn superresolve(&self, y: &ImageGrid) -> Result<ImageGrid> {
        y.map_planes(|plane| self.superresolve_logged(plane, None).map(|(x, _)| x))
    }

    /// [`superresolve`](Self::superresolve) with one [`RunLog`] per channel.
    /// `gt`, when given, must have the output shape and channel count.
    pub fn superresolve_traced(&self, y: &ImageGrid, gt: Option<&ImageGrid>) -> Result<(ImageGrid, Vec<RunLog>)> {
        let gt_planes = match gt {
            Some(g) => {
                let (h, w) = self.op.hr_dims(y.dims());
                if g.dims() != (h, w) || g.channels() != y.channels() {
                    return Err(Error::invalid(format!(
                        "ground truth is {}x{}x{}, expected {h}x{w}x{}",
                        g.height(),
                        g.width(),
                        g.channels(),
                        y.channels()
                    )));
                }
                g.split_channels().into_iter().map(Some).collect()
            }
            None => vec![None; y.channels()],
        };
        let mut planes = Vec::with_capacity(y.channels());
        let mut logs = Vec::with_capacity(y.channels());
        for (plane, g) in y.split_channels().iter().zip(&gt_planes) {
            let (x, log) = self.superresolve_logged(plane, g.as_ref())?;
            planes.push(x);
            logs.push(log);
        }
        Ok((ImageGrid::merge_channels(&planes)?, logs))
    }

    /// Single-channel [`superresolve`](Self::superresolve) that also records
    /// per-stage objective, PSNR against `gt` (cropped by the scale) and timing.
    pub fn superresolve_logged(&self, y: &ImageGrid, gt: Option<&ImageGrid>) -> Result<(ImageGrid, RunLog)> {
        let t0 = Instant::now();
        let crop = self.op.scale();
        let score = |x: &ImageGrid| -> Result<Option<f64>> {
            gt.map(|g| psnr(&x.clamp01(), g, crop).map(cap_psnr)).transpose()
        };
        let mut state = self.init_state(y)?;
        let mut log = RunLog {
            init_objective: self.objective_value(&state, y)?,
            init_psnr_db: score(&state.x)?,
            lipschitz: state.steps.lipschitz,
            delta: state.steps.delta,
            delta_prime: state.steps.delta_prime,
            ..RunLog::default()
        };
        for _ in 0..self.cfg.stages {
            let ts = Instant::now();
            let strength = self.cfg.denoiser.strength_at(state.stage_index);
            state = self.run_stage(&state, y)?;
            log.stages.push(StageLog {
                stage: state.stage_index,
                strength,
                objective: self.objective_value(&state, y)?,
                psnr_db: score(&state.x)?,
                seconds: ts.elapsed().as_secs_f64(),
            });
        }
        let (lo, hi) = state.x.min_max();
        log.overshoot = (-lo).max(hi - 1.0).max(0.0);
        if log.overshoot > 0.0 {
            log::debug!("clamping output, overshoot {:.4}", log.overshoot);
        }
        log.seconds = t0.elapsed().as_secs_f64();
        Ok((state.x.clamp01(), log))
    }
}
