//! Iterative spectrum estimation: impute under the current periodic model,
//! smooth the periodograms of the completed fields, repeat.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imputation::{stream_rng, Imputer};
use crate::lattice::{embed_mask, embed_values, GridField, LatticeSpec, ObservationMask, Shape};
use crate::solver::{PcgConfig, PreconditionerKind};
use crate::spectral::{ar1_values, periodogram_with, smooth, smooth_spectrum, smoothed_sd, SmoothingKernel, SpectrumGrid};

/// Upper end of the filter parameter search.
pub const THETA_MAX: f64 = 0.999;
const THETA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filter {
    #[default]
    None,
    /// Quasi-Matérn whitening filter fitted by Whittle likelihood.
    Ar1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Conditional simulations per iteration.
    pub l: usize,
    pub burn_in: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub filter: Filter,
    pub precond: PreconditionerKind,
    pub max_iterations: usize,
    pub pcg: PcgConfig,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            l: 1,
            burn_in: 30,
            epsilon: 0.05,
            delta: 0.02,
            filter: Filter::None,
            precond: PreconditionerKind::InverseSpectrum,
            max_iterations: 1000,
            pcg: PcgConfig::default(),
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    /// Tighter tolerance and longer burn-in, as used in simulation studies.
    pub fn for_simulation() -> Self {
        EstimatorConfig {
            burn_in: 100,
            epsilon: 0.01,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::invalid("L must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {}", self.delta)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        self.pcg.validate()
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub spectrum: SpectrumGrid,
    pub iterations: usize,
    /// Convergence statistic comparing each update to its predecessor.
    pub stat_trace: Vec<f64>,
    /// Fitted filter parameter per iteration; empty without a filter.
    pub theta_trace: Vec<f64>,
    /// Conditional expectation under the final spectrum, on the embedding lattice.
    pub condexp: GridField,
    /// One conditional simulation under the final spectrum, on the embedding lattice.
    pub condsim: GridField,
    pub converged: bool,
}

/// Output of one update.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub next: SpectrumGrid,
    /// Smoothed (or filtered-smoothed) average periodogram of this step.
    pub smoothed: SpectrumGrid,
    pub theta: Option<f64>,
}

/// Flat spectrum at the sample variance of the observed values.
pub fn initial_spectrum(data: &[f64], spec: &LatticeSpec) -> Result<SpectrumGrid> {
    let n = data.len();
    if n == 0 {
        return Err(Error::NoObservations);
    }
    if n < 2 {
        return Err(Error::ZeroVariance);
    }
    let mean = data.iter().sum::<f64>() / n as f64;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::ZeroVariance);
    }
    SpectrumGrid::constant(spec.z(), var)
}

/// `max_ω |f_new(ω) − f_old(ω)| / S(ω)` with `S` the smoothed standard
/// deviation of `f_old`.
pub fn convergence_stat(f_new: &SpectrumGrid, f_old: &SpectrumGrid, kernel: &SmoothingKernel) -> Result<f64> {
    if f_new.dims() != f_old.dims() {
        return Err(Error::mismatch(f_old.dims(), f_new.dims()));
    }
    let s = smoothed_sd(f_old, kernel);
    Ok(f_new
        .values()
        .iter()
        .zip(f_old.values())
        .zip(&s)
        .map(|((a, b), s)| (a - b).abs() / s)
        .fold(0.0, f64::max))
}

/// Negative profile Whittle log likelihood of the quasi-Matérn model with a
/// free scale, up to constants.
fn whittle_objective(theta: f64, pgram: &[f64], shape: &Shape) -> f64 {
    let f = ar1_values(theta, shape);
    let m = pgram.len() as f64;
    let scale = pgram.iter().zip(&f).map(|(p, f)| p / f).sum::<f64>() / m;
    let log_f: f64 = f.iter().map(|v| v.ln()).sum();
    m * scale.max(f64::MIN_POSITIVE).ln() + log_f
}

/// Maximizer of the Whittle likelihood over `[0, THETA_MAX]`.
pub fn fit_theta(pgram: &SpectrumGrid) -> f64 {
    let shape = pgram.shape();
    let obj = |t: f64| whittle_objective(t, pgram.values(), shape);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, THETA_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    while b - a > THETA_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = obj(d);
        }
    }
    let mid = 0.5 * (a + b);
    // the objective need not be unimodal; the endpoints are cheap to check
    let mut best = (obj(mid), mid);
    for t in [0.0, THETA_MAX] {
        let v = obj(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

/// `f_θ̂ · smooth(P / f_θ̂)` with `θ̂` fitted to `P` by Whittle likelihood.
pub fn filtered_smooth(avg_pgram: &SpectrumGrid, kernel: &SmoothingKernel) -> (SpectrumGrid, f64) {
    let theta = fit_theta(avg_pgram);
    let f = ar1_values(theta, avg_pgram.shape());
    let ratio: Vec<f64> = avg_pgram.values().iter().zip(&f).map(|(p, f)| p / f).collect();
    let out = smooth(&ratio, kernel).iter().zip(&f).map(|(s, f)| s * f).collect();
    (SpectrumGrid::symmetrized(avg_pgram.shape().clone(), out), theta)
}

fn smooth_with(avg: &SpectrumGrid, kernel: &SmoothingKernel, filter: Filter) -> (SpectrumGrid, Option<f64>) {
    match filter {
        Filter::None => (smooth_spectrum(avg.values(), kernel), None),
        Filter::Ar1 => {
            let (s, t) = filtered_smooth(avg, kernel);
            (s, Some(t))
        }
    }
}

/// Stream index of simulation `l` in iteration `k`.
fn stream_of(k: usize, l: usize) -> u64 {
    ((k as u64) << 32) | l as u64
}

/// One update `f_k → f_{k+1}`. `mask` lives on the embedding lattice and
/// `data` holds the values at its observed cells.
pub fn iteration_step(
    f_k: &SpectrumGrid,
    data: &[f64],
    mask: &ObservationMask,
    kernel: &SmoothingKernel,
    cfg: &EstimatorConfig,
    k: usize,
) -> Result<StepOutput> {
    if k == 0 {
        return Err(Error::invalid("iterations are numbered from 1"));
    }
    let fft = kernel.fft().clone();
    let imputer = Imputer::with_fft(f_k, mask, cfg.precond, cfg.pcg, fft.clone())?;
    let pgrams: Vec<SpectrumGrid> = (0..cfg.l)
        .into_par_iter()
        .map(|l| {
            let mut rng = stream_rng(cfg.seed, stream_of(k, l));
            let sim = imputer.conditional_simulation(data, &mut rng)?;
            Ok(periodogram_with(&fft, sim.field.values()))
        })
        .collect::<Result<_>>()?;
    let mut avg = vec![0.0; f_k.len()];
    for p in &pgrams {
        for (a, v) in avg.iter_mut().zip(p.values()) {
            *a += v;
        }
    }
    let inv_l = 1.0 / cfg.l as f64;
    for a in &mut avg {
        *a *= inv_l;
    }
    let avg = SpectrumGrid::symmetrized(f_k.shape().clone(), avg);
    let (smoothed, theta) = smooth_with(&avg, kernel, cfg.filter);
    let next = update(f_k, &smoothed, k, cfg.burn_in);
    Ok(StepOutput { next, smoothed, theta })
}

/// Replace during burn-in; afterwards a running mean with weight
/// `1/(k−B+1)` on the new smooth.
pub fn update(f_k: &SpectrumGrid, smoothed: &SpectrumGrid, k: usize, burn_in: usize) -> SpectrumGrid {
    if k <= burn_in {
        return smoothed.clone();
    }
    let r = (k - burn_in) as f64;
    let values = f_k
        .values()
        .iter()
        .zip(smoothed.values())
        .map(|(a, b)| (r * a + b) / (r + 1.0))
        .collect();
    SpectrumGrid::symmetrized(f_k.shape().clone(), values)
}

/// Runs the iteration from a flat start. `mask_y` and `data` describe the
/// observations on the observation lattice of `spec`.
pub fn run_estimation(data: &[f64], mask_y: &ObservationMask, spec: &LatticeSpec, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    if mask_y.dims() != spec.y() {
        return Err(Error::mismatch(spec.y(), mask_y.dims()));
    }
    if data.len() != mask_y.n_observed() {
        return Err(Error::mismatch(mask_y.n_observed(), data.len()));
    }
    let mask = embed_mask(mask_y, spec)?;
    let kernel = SmoothingKernel::new(cfg.delta, spec.z())?;
    let mut f = initial_spectrum(data, spec)?;
    let mut stat_trace = Vec::new();
    let mut theta_trace = Vec::new();
    let mut converged = false;
    let mut k = 1;
    while k <= cfg.max_iterations {
        let step = iteration_step(&f, data, &mask, &kernel, cfg, k)?;
        let stat = convergence_stat(&step.next, &f, &kernel)?;
        stat_trace.push(stat);
        theta_trace.extend(step.theta);
        f = step.next;
        if k > cfg.burn_in && stat < cfg.epsilon {
            converged = true;
            break;
        }
        k += 1;
    }
    let iterations = stat_trace.len();
    let imputer = Imputer::with_fft(&f, &mask, cfg.precond, cfg.pcg, kernel.fft().clone())?;
    let condexp = imputer.conditional_expectation(data)?.field;
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let condsim = imputer.conditional_simulation(data, &mut rng)?.field;
    Ok(EstimationResult {
        spectrum: f,
        iterations,
        stat_trace,
        theta_trace,
        condexp,
        condsim,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub delta: f64,
    /// Sum of squared prediction errors per candidate; `+∞` when the run
    /// did not converge.
    pub scores: Vec<f64>,
}

/// Index of the smallest finite score, first one on ties.
pub fn best_candidate(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Chooses the bandwidth by holding out a random fraction of the observed
/// cells and predicting them by conditional expectation.
pub fn select_bandwidth_cv(
    data: &[f64],
    mask_y: &ObservationMask,
    spec: &LatticeSpec,
    cfg: &EstimatorConfig,
    candidates: &[f64],
    holdout_frac: f64,
    seed: u64,
) -> Result<CvResult> {
    if candidates.len() < 2 {
        return Err(Error::invalid("need at least two candidate bandwidths"));
    }
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::invalid(format!("holdout fraction must lie in (0, 1), got {holdout_frac}")));
    }
    if data.len() != mask_y.n_observed() {
        return Err(Error::mismatch(mask_y.n_observed(), data.len()));
    }
    let n = data.len();
    let n_hold = ((holdout_frac * n as f64).round() as usize).clamp(1, n.saturating_sub(2));
    if n < 3 {
        return Err(Error::invalid("too few observations for cross-validation"));
    }
    let mut rng = stream_rng(seed, u64::MAX - 1);
    let mut held = vec![false; n];
    for i in index::sample(&mut rng, n, n_hold) {
        held[i] = true;
    }
    let observed = mask_y.observed_indices();
    let mut reduced = mask_y.as_slice().to_vec();
    let mut kept = Vec::with_capacity(n - n_hold);
    let mut held_cells = Vec::with_capacity(n_hold);
    for (p, &lin) in observed.iter().enumerate() {
        if held[p] {
            reduced[lin] = false;
            held_cells.push((lin, data[p]));
        } else {
            kept.push(data[p]);
        }
    }
    let reduced = ObservationMask::new(mask_y.dims(), reduced)?;
    // held-out cells located on the embedding lattice
    let lin_z: Vec<usize> = embed_values(&(0..spec.n_cells_y()).collect::<Vec<_>>(), spec, usize::MAX)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != usize::MAX)
        .map(|(z, _)| z)
        .collect();
    let mut scores = Vec::with_capacity(candidates.len());
    for &delta in candidates {
        let run_cfg = EstimatorConfig { delta, ..cfg.clone() };
        let score = match run_estimation(&kept, &reduced, spec, &run_cfg) {
            Ok(res) if res.converged => {
                let pred = res.condexp.values();
                held_cells
                    .iter()
                    .map(|&(lin, v)| {
                        let e = pred[lin_z[lin]] - v;
                        e * e
                    })
                    .sum()
            }
            Ok(_) | Err(Error::NotConverged(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        scores.push(score);
    }
    let best = best_candidate(&scores)
        .ok_or_else(|| Error::invalid("no candidate bandwidth produced a converged estimate"))?;
    Ok(CvResult {
        delta: candidates[best],
        scores,
    })
}
