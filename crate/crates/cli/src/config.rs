//! Run configuration: defaults, then an optional `key=value` file, then
//! command-line flags.

use std::path::Path;

use pspec::estimator::{EstimatorConfig, Filter};
use pspec::solver::{PreconditionerKind, DEFAULT_NEIGHBORS};

use crate::trend::MeanMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondMethod {
    Fft,
    Vecchia,
}

impl std::str::FromStr for PrecondMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fft" => Ok(PrecondMethod::Fft),
            "vecchia" => Ok(PrecondMethod::Vecchia),
            _ => Err(format!("precond_method must be fft or vecchia, got {s:?}")),
        }
    }
}

pub fn parse_filter(s: &str) -> Result<Filter, String> {
    match s.to_ascii_lowercase().as_str() {
        "none" | "false" => Ok(Filter::None),
        "ar1" | "spec_ar1" => Ok(Filter::Ar1),
        _ => Err(format!("par_spec_fun must be none or ar1, got {s:?}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub embed_fac: f64,
    pub burn_iters: usize,
    pub kern_parm: f64,
    pub par_spec_fun: Filter,
    pub precond_method: PrecondMethod,
    pub neighbors: usize,
    pub epsilon: f64,
    pub l: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub mean: MeanMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        RunConfig {
            embed_fac: 1.2,
            burn_iters: est.burn_in,
            kern_parm: est.delta,
            par_spec_fun: est.filter,
            precond_method: PrecondMethod::Fft,
            neighbors: DEFAULT_NEIGHBORS,
            epsilon: est.epsilon,
            l: est.l,
            seed: est.seed,
            max_iterations: est.max_iterations,
            mean: MeanMode::Constant,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "embed_fac" => self.embed_fac = parse_value(key, value)?,
            "burn_iters" => self.burn_iters = parse_value(key, value)?,
            "kern_parm" => self.kern_parm = parse_value(key, value)?,
            "par_spec_fun" => self.par_spec_fun = parse_filter(value)?,
            "precond_method" => self.precond_method = value.parse()?,
            "neighbors" | "m" => self.neighbors = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "L" => self.l = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "max_iterations" => self.max_iterations = parse_value(key, value)?,
            "mean" => self.mean = value.parse()?,
            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            self.set(k.trim(), v.trim()).map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_text(&text)
    }

    pub fn preconditioner(&self) -> PreconditionerKind {
        match self.precond_method {
            PrecondMethod::Fft => PreconditionerKind::InverseSpectrum,
            PrecondMethod::Vecchia => PreconditionerKind::Vecchia {
                neighbors: self.neighbors,
            },
        }
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            l: self.l,
            burn_in: self.burn_iters,
            epsilon: self.epsilon,
            delta: self.kern_parm,
            filter: self.par_spec_fun,
            precond: self.preconditioner(),
            max_iterations: self.max_iterations,
            seed: self.seed,
            ..EstimatorConfig::default()
        }
    }
}
