use rand::Rng;

use crate::baselines::{build_taper, tapered_periodogram, zero_infill_periodogram};
use crate::circulant::hermitian_sample;
use crate::error::{Error, Result};
use crate::estimator::{run_estimation, EstimatorConfig, Filter};
use crate::fft::FftNd;
use crate::lattice::{build_embedding, GridField, ObservationMask, Shape};
use crate::spectral::{matern_cov, wrapped_true_spectrum, MaternParams, SmoothingKernel, SpectrumGrid};

const MAX_DOUBLINGS: usize = 4;
const NEGATIVE_TOL: f64 = 1e-8;
const CLAMP_TOL: f64 = 1e-6;

/// Exact sampler for a stationary field on a rectangular grid, by circulant
/// embedding of the (nonperiodic) covariance on a larger torus.
#[derive(Debug, Clone)]
pub struct CirculantSimulator {
    y: Vec<usize>,
    fft: FftNd,
    eigenvalues: Vec<f64>,
    clamp: f64,
}

impl CirculantSimulator {
    /// The torus starts at three times each grid side and doubles until
    /// negative eigenvalues are within `1e-8` of the largest; leftovers are
    /// clamped to zero, and a clamp above `1e-6` of the largest is an error.
    pub fn new<F>(cov_fn: F, y: &[usize]) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        if y.is_empty() || y.contains(&0) {
            return Err(Error::invalid(format!("grid dimensions must be positive, got {y:?}")));
        }
        let mut torus: Vec<usize> = y.iter().map(|&n| 3 * n).collect();
        let mut doublings = 0;
        loop {
            let shape = Shape::new(&torus);
            let mut idx = vec![0; torus.len()];
            let mut lag = vec![0.0; torus.len()];
            let cov: Vec<f64> = (0..shape.len())
                .map(|lin| {
                    shape.unravel(lin, &mut idx);
                    for ((l, &i), &n) in lag.iter_mut().zip(&idx).zip(&torus) {
                        *l = i.min(n - i) as f64;
                    }
                    cov_fn(&lag)
                })
                .collect();
            let fft = FftNd::new(&torus);
            let mut eig: Vec<f64> = fft.forward_real(&cov).iter().map(|c| c.re).collect();
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            if min >= -NEGATIVE_TOL * max || doublings == MAX_DOUBLINGS {
                let clamp = (-min).max(0.0);
                if clamp > CLAMP_TOL * max {
                    return Err(Error::EmbeddingFailure { clamp: clamp / max });
                }
                for e in &mut eig {
                    *e = e.max(0.0);
                }
                return Ok(CirculantSimulator {
                    y: y.to_vec(),
                    fft,
                    eigenvalues: eig,
                    clamp,
                });
            }
            torus.iter_mut().for_each(|n| *n *= 2);
            doublings += 1;
        }
    }

    pub fn torus(&self) -> &[usize] {
        self.fft.shape().dims()
    }

    /// Magnitude of the most negative eigenvalue that was set to zero.
    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridField {
        let full = hermitian_sample(&self.fft, &self.eigenvalues, rng);
        let torus = Shape::new(self.torus());
        let out = Shape::new(&self.y);
        let mut idx = vec![0; self.y.len()];
        let values = (0..out.len())
            .map(|lin| {
                out.unravel(lin, &mut idx);
                full[torus.ravel(&idx)]
            })
            .collect();
        GridField::from_parts(out, values)
    }
}

/// One Matérn field over a grid of shape `y`.
pub fn simulate_matern_field<R: Rng + ?Sized>(p: &MaternParams, y: &[usize], rng: &mut R) -> Result<GridField> {
    let p = *p;
    Ok(CirculantSimulator::new(move |h| matern_cov(h, &p), y)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingSetting {
    /// Each cell missing independently with probability 0.3.
    Scattered,
    /// A centered block with sides `round(√0.3 · y_j)`.
    CenterBlock,
    Complete,
}

impl MissingSetting {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(MissingSetting::Scattered),
            2 => Ok(MissingSetting::CenterBlock),
            3 => Ok(MissingSetting::Complete),
            _ => Err(Error::invalid(format!("missingness setting must be 1, 2 or 3, got {i}"))),
        }
    }
}

const MISSING_FRACTION: f64 = 0.3;

pub fn make_missingness<R: Rng + ?Sized>(setting: MissingSetting, y: &[usize], rng: &mut R) -> ObservationMask {
    let shape = Shape::new(y);
    let observed = match setting {
        MissingSetting::Complete => vec![true; shape.len()],
        MissingSetting::Scattered => (0..shape.len()).map(|_| rng.random::<f64>() >= MISSING_FRACTION).collect(),
        MissingSetting::CenterBlock => {
            let side: Vec<usize> = y.iter().map(|&n| (MISSING_FRACTION.sqrt() * n as f64).round() as usize).collect();
            let start: Vec<usize> = y.iter().zip(&side).map(|(&n, &b)| (n - b) / 2).collect();
            let mut idx = vec![0; y.len()];
            (0..shape.len())
                .map(|lin| {
                    shape.unravel(lin, &mut idx);
                    !idx.iter().zip(&start).zip(&side).all(|((&i, &s), &b)| i >= s && i < s + b)
                })
                .collect()
        }
    };
    ObservationMask::new(y, observed).expect("mask length matches grid")
}

#[derive(Debug, Clone)]
pub struct Metrics {
    pub bias: Vec<f64>,
    pub mse: Vec<f64>,
    pub rimse: f64,
}

/// Relative bias, mean relative squared error, and its root mean over
/// frequencies.
pub fn metrics(estimates: &[SpectrumGrid], f_true: &SpectrumGrid) -> Result<Metrics> {
    if estimates.is_empty() {
        return Err(Error::invalid("need at least one estimate"));
    }
    if f_true.values().contains(&0.0) {
        return Err(Error::invalid("true spectrum contains zeros"));
    }
    let m = f_true.len();
    let mut bias = vec![0.0; m];
    let mut mse = vec![0.0; m];
    for est in estimates {
        if est.dims() != f_true.dims() {
            return Err(Error::mismatch(f_true.dims(), est.dims()));
        }
        for i in 0..m {
            let r = (est.values()[i] - f_true.values()[i]) / f_true.values()[i];
            bias[i] += r;
            mse[i] += r * r;
        }
    }
    let j = estimates.len() as f64;
    bias.iter_mut().for_each(|b| *b /= j);
    mse.iter_mut().for_each(|v| *v /= j);
    let rimse = (mse.iter().sum::<f64>() / m as f64).sqrt();
    Ok(Metrics { bias, mse, rimse })
}

/// Spectrum estimators compared in the simulation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Iterative periodic imputation on a lattice expanded by `tau`.
    Periodic { tau: f64, filter: Filter },
    ZeroInfill,
    Tapered { p: f64, interior: bool },
}

impl Method {
    /// Shape of the frequency grid the estimate lives on.
    pub fn grid(&self, y: &[usize]) -> Result<Vec<usize>> {
        match self {
            Method::Periodic { tau, .. } => Ok(build_embedding(y, *tau)?.z().to_vec()),
            _ => Ok(y.to_vec()),
        }
    }

    /// Estimate from observed `data` at the observed cells of `mask`. For
    /// the iterative method `None` signals a run that hit its iteration cap.
    pub fn estimate(&self, data: &[f64], mask: &ObservationMask, delta: f64, cfg: &EstimatorConfig) -> Result<Option<SpectrumGrid>> {
        let y = mask.dims();
        match *self {
            Method::Periodic { tau, filter } => {
                let spec = build_embedding(y, tau)?;
                let cfg = EstimatorConfig {
                    delta,
                    filter,
                    ..cfg.clone()
                };
                let res = run_estimation(data, mask, &spec, &cfg)?;
                Ok(res.converged.then_some(res.spectrum))
            }
            Method::ZeroInfill => {
                let k = SmoothingKernel::new(delta, y)?;
                zero_infill_periodogram(data, mask, &k).map(Some)
            }
            Method::Tapered { p, interior } => {
                let k = SmoothingKernel::new(delta, y)?;
                let taper = build_taper(mask, p, interior)?;
                tapered_periodogram(data, &taper, &k).map(Some)
            }
        }
    }
}

/// Lattice spectral density of `cov_fn` at the frequencies of `method`.
pub fn true_spectrum<F>(cov_fn: F, method: &Method, y: &[usize]) -> Result<SpectrumGrid>
where
    F: Fn(&[f64]) -> f64,
{
    let tau = match method {
        Method::Periodic { tau, .. } => *tau,
        _ => 1.0,
    };
    wrapped_true_spectrum(cov_fn, &build_embedding(y, tau)?, None)
}
