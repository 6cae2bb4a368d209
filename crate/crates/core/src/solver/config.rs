use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::denoiser::DenoiserSpec;
use crate::error::{Error, Result};
use crate::narm::NarmParams;

/// Which `x` update a stage performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMode {
    /// NARM-regularised splitting: `v`, `S`, `e` and `x` updates.
    Mog,
    /// Plain gradient-step splitting without the NARM terms.
    Dpdnn,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::Mog => "mog",
            SolverMode::Dpdnn => "dpdnn",
        })
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mog" => Ok(SolverMode::Mog),
            "dpdnn" => Ok(SolverMode::Dpdnn),
            other => Err(Error::Config(format!("unknown solver mode {other:?}"))),
        }
    }
}

/// A gradient step, either fixed or `step_fraction / L` with `L` estimated by
/// power iteration when the solver state is initialised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Auto => f.write_str("auto"),
            StepSize::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for StepSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(StepSize::Auto);
        }
        s.parse::<f64>()
            .map(StepSize::Fixed)
            .map_err(|_| Error::Config(format!("step size {s:?} is neither `auto` nor a number")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Weight of the NARM-corrected fidelity `||y - A(x + e)||^2`.
    pub mu: f64,
    /// Weight of the AR consistency `||S x - (x + e)||^2`.
    pub gamma_narm: f64,
    /// Splitting weight `||x - v||^2`.
    pub eta: f64,
    /// Step for the `e` update.
    pub delta: StepSize,
    /// Step for the `x` update.
    pub delta_prime: StepSize,
    /// Fraction of `1/L` used by automatic steps.
    pub step_fraction: f64,
    pub power_iterations: usize,
    pub stages: usize,
    pub inner_x_steps: usize,
    pub inner_e_steps: usize,
    pub denoiser: DenoiserSpec,
    pub narm: NarmParams,
    pub narm_backend: String,
    /// Optional embedding weights file for the attention backend.
    pub embedding_weights: Option<PathBuf>,
    pub mode: SolverMode,
    /// Use `A(x - e)` in the second fidelity gradient of the `x` update
    /// instead of the objective-consistent `A(x + e)`.
    pub printed_e_sign: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: 0.2,
            gamma_narm: 0.1,
            eta: 0.5,
            delta: StepSize::Auto,
            delta_prime: StepSize::Auto,
            step_fraction: 0.8,
            power_iterations: 20,
            stages: 4,
            inner_x_steps: 1,
            inner_e_steps: 1,
            denoiser: DenoiserSpec::default(),
            narm: NarmParams::default(),
            narm_backend: "closed_form".into(),
            embedding_weights: None,
            mode: SolverMode::Mog,
            printed_e_sign: false,
        }
    }
}

/// Every key accepted by [`SolverConfig::set`], in snapshot order.
pub const CONFIG_KEYS: &[&str] = &[
    "mu",
    "gamma_narm",
    "eta",
    "delta",
    "delta_prime",
    "step_fraction",
    "power_iterations",
    "stages",
    "inner_x_steps",
    "inner_e_steps",
    "mode",
    "printed_e_sign",
    "denoiser",
    "strength",
    "strength_decay",
    "narm_backend",
    "patch_size",
    "neighbors",
    "search_window",
    "gamma_reg",
    "q",
    "embedding_weights",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

impl SolverConfig {
    /// Sets one field from its textual key/value form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "mu" => self.mu = num(key, value)?,
            "gamma_narm" => self.gamma_narm = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "delta" => self.delta = value.parse()?,
            "delta_prime" => self.delta_prime = value.parse()?,
            "step_fraction" => self.step_fraction = num(key, value)?,
            "power_iterations" => self.power_iterations = num(key, value)?,
            "stages" => self.stages = num(key, value)?,
            "inner_x_steps" => self.inner_x_steps = num(key, value)?,
            "inner_e_steps" => self.inner_e_steps = num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "printed_e_sign" => self.printed_e_sign = boolean(key, value)?,
            "denoiser" => self.denoiser.kind = value.to_string(),
            "strength" => self.denoiser.strength = num(key, value)?,
            "strength_decay" => self.denoiser.decay = num(key, value)?,
            "narm_backend" => self.narm_backend = value.to_string(),
            "patch_size" => self.narm.patch_size = num(key, value)?,
            "neighbors" => self.narm.neighbors = num(key, value)?,
            "search_window" => self.narm.search_window = num(key, value)?,
            "gamma_reg" => self.narm.gamma_reg = num(key, value)?,
            "q" => self.narm.q = num(key, value)?,
            "embedding_weights" => {
                self.embedding_weights = match value {
                    "" | "none" => None,
                    path => Some(PathBuf::from(path)),
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped. All offending lines are reported together.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut problems = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = self.set(k, v) {
                        problems.push(format!("line {}: {}", lineno + 1, e));
                    }
                }
                None => problems.push(format!("line {}: expected `key = value`, got {line:?}", lineno + 1)),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SolverConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Snapshot as `(key, value)` pairs, in [`CONFIG_KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        CONFIG_KEYS
            .iter()
            .map(|&k| {
                let v = match k {
                    "mu" => self.mu.to_string(),
                    "gamma_narm" => self.gamma_narm.to_string(),
                    "eta" => self.eta.to_string(),
                    "delta" => self.delta.to_string(),
                    "delta_prime" => self.delta_prime.to_string(),
                    "step_fraction" => self.step_fraction.to_string(),
                    "power_iterations" => self.power_iterations.to_string(),
                    "stages" => self.stages.to_string(),
                    "inner_x_steps" => self.inner_x_steps.to_string(),
                    "inner_e_steps" => self.inner_e_steps.to_string(),
                    "mode" => self.mode.to_string(),
                    "printed_e_sign" => self.printed_e_sign.to_string(),
                    "denoiser" => self.denoiser.kind.clone(),
                    "strength" => self.denoiser.strength.to_string(),
                    "strength_decay" => self.denoiser.decay.to_string(),
                    "narm_backend" => self.narm_backend.clone(),
                    "patch_size" => self.narm.patch_size.to_string(),
                    "neighbors" => self.narm.neighbors.to_string(),
                    "search_window" => self.narm.search_window.to_string(),
                    "gamma_reg" => self.narm.gamma_reg.to_string(),
                    "q" => self.narm.q.to_string(),
                    "embedding_weights" => self
                        .embedding_weights
                        .as_ref()
                        .map_or_else(|| "none".to_string(), |p| p.display().to_string()),
                    _ => unreachable!(),
                };
                (k, v)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [("mu", self.mu), ("gamma_narm", self.gamma_narm), ("eta", self.eta)] {
            if !(v >= 0.0) || !v.is_finite() {
                problems.push(format!("{name} must be >= 0"));
            }
        }
        for (name, s) in [("delta", self.delta), ("delta_prime", self.delta_prime)] {
            if let StepSize::Fixed(v) = s {
                if !(v > 0.0) || !v.is_finite() {
                    problems.push(format!("{name} must be > 0"));
                }
            }
        }
        if !(self.step_fraction > 0.0) || !self.step_fraction.is_finite() {
            problems.push("step_fraction must be > 0".into());
        }
        if self.power_iterations == 0 {
            problems.push("power_iterations must be >= 1".into());
        }
        if let Err(e) = self.denoiser.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.narm.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}
