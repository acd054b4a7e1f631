//! Conditional expectation and conditional simulation of the unobserved
//! cells of the embedding lattice under a periodic Gaussian model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circulant::CirculantOperator;
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::lattice::{GridField, ObservationMask};
use crate::solver::{solve_observed, PcgConfig, PcgReport, Preconditioner, PreconditionerKind};
use crate::spectral::SpectrumGrid;

#[derive(Debug, Clone)]
pub struct ImputationResult {
    /// Completed field; observed cells hold the input values unchanged.
    pub field: GridField,
    /// Values at the missing cells, in row-major order of those cells.
    pub missing_values: Vec<f64>,
    pub report: PcgReport,
}

/// A periodic model bound to an observation pattern, with its
/// preconditioner built once and reused across solves.
#[derive(Debug, Clone)]
pub struct Imputer {
    op: CirculantOperator,
    precond: Preconditioner,
    pcg: PcgConfig,
}

impl Imputer {
    pub fn new(f: &SpectrumGrid, mask: &ObservationMask, kind: PreconditionerKind, pcg: PcgConfig) -> Result<Self> {
        Self::with_fft(f, mask, kind, pcg, FftNd::new(f.dims()))
    }

    pub fn with_fft(
        f: &SpectrumGrid,
        mask: &ObservationMask,
        kind: PreconditionerKind,
        pcg: PcgConfig,
        fft: FftNd,
    ) -> Result<Self> {
        pcg.validate()?;
        if mask.n_observed() == 0 {
            return Err(Error::NoObservations);
        }
        let op = CirculantOperator::with_fft(f, mask, fft)?;
        let precond = Preconditioner::build(kind, &op, mask)?;
        Ok(Imputer { op, precond, pcg })
    }

    pub fn operator(&self) -> &CirculantOperator {
        &self.op
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.precond
    }

    fn check_data(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.op.n_observed() {
            return Err(Error::mismatch(self.op.n_observed(), data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observed values must be finite"));
        }
        Ok(())
    }

    /// `Bᵀ A⁻¹ rhs` at the missing cells.
    fn krige(&self, rhs: &[f64]) -> Result<(Vec<f64>, PcgReport)> {
        if self.op.n_missing() == 0 {
            let report = PcgReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            };
            return Ok((Vec::new(), report));
        }
        let (x, report) = solve_observed(&self.op, &self.precond, rhs, &self.pcg)?;
        if !report.converged {
            return Err(Error::NotConverged(report));
        }
        Ok((self.op.bt_multiply(&x), report))
    }

    fn assemble(&self, data: &[f64], missing_values: Vec<f64>, report: PcgReport) -> ImputationResult {
        let mut values = vec![0.0; self.op.m()];
        for (&i, &v) in self.op.observed_indices().iter().zip(data) {
            values[i] = v;
        }
        for (&i, &v) in self.op.missing_indices().iter().zip(&missing_values) {
            values[i] = v;
        }
        ImputationResult {
            field: GridField::from_parts(self.op.shape().clone(), values),
            missing_values,
            report,
        }
    }

    /// `E(W | U) = Bᵀ A⁻¹ U`.
    pub fn conditional_expectation(&self, data: &[f64]) -> Result<ImputationResult> {
        self.check_data(data)?;
        let (w, report) = self.krige(data)?;
        Ok(self.assemble(data, w, report))
    }

    /// One draw from the conditional law of `W` given `U`, by correcting an
    /// unconditional draw `(U*, W*)` with the kriged residual `U − U*`.
    pub fn conditional_simulation<R: Rng + ?Sized>(&self, data: &[f64], rng: &mut R) -> Result<ImputationResult> {
        self.check_data(data)?;
        let z = self.op.unconditional_sample(rng);
        let z = z.values();
        let resid: Vec<f64> = self
            .op
            .observed_indices()
            .iter()
            .zip(data)
            .map(|(&i, &u)| u - z[i])
            .collect();
        let (corr, report) = self.krige(&resid)?;
        let w: Vec<f64> = self
            .op
            .missing_indices()
            .iter()
            .zip(&corr)
            .map(|(&i, &c)| z[i] + c)
            .collect();
        Ok(self.assemble(data, w, report))
    }

    /// Root mean squared difference between `n_sims` conditional
    /// simulations and the conditional expectation, at each missing cell.
    /// Simulation `s` uses stream `s` of a generator seeded with `seed`.
    pub fn conditional_sd(&self, data: &[f64], n_sims: usize, seed: u64) -> Result<Vec<f64>> {
        if n_sims < 2 {
            return Err(Error::invalid(format!("n_sims must be at least 2, got {n_sims}")));
        }
        let mean = self.conditional_expectation(data)?.missing_values;
        let sims: Vec<Vec<f64>> = (0..n_sims)
            .into_par_iter()
            .map(|s| {
                let mut rng = stream_rng(seed, s as u64);
                self.conditional_simulation(data, &mut rng).map(|r| r.missing_values)
            })
            .collect::<Result<_>>()?;
        let mut acc = vec![0.0; mean.len()];
        for sim in &sims {
            for ((a, s), m) in acc.iter_mut().zip(sim).zip(&mean) {
                *a += (s - m) * (s - m);
            }
        }
        Ok(acc.into_iter().map(|a| (a / n_sims as f64).sqrt()).collect())
    }
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn conditional_expectation(
    data: &[f64],
    mask: &ObservationMask,
    f: &SpectrumGrid,
    precond: PreconditionerKind,
    cfg: &PcgConfig,
) -> Result<ImputationResult> {
    Imputer::new(f, mask, precond, *cfg)?.conditional_expectation(data)
}

pub fn conditional_simulation<R: Rng + ?Sized>(
    data: &[f64],
    mask: &ObservationMask,
    f: &SpectrumGrid,
    precond: PreconditionerKind,
    cfg: &PcgConfig,
    rng: &mut R,
) -> Result<ImputationResult> {
    Imputer::new(f, mask, precond, *cfg)?.conditional_simulation(data, rng)
}

pub fn conditional_sd(
    data: &[f64],
    mask: &ObservationMask,
    f: &SpectrumGrid,
    n_sims: usize,
    precond: PreconditionerKind,
    cfg: &PcgConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    Imputer::new(f, mask, precond, *cfg)?.conditional_sd(data, n_sims, seed)
}
