//! Dense-matrix analysis of the bias of the imputed-data bispectrum, plus
//! the simulation harness used to compare estimators.

mod simulation;

pub use simulation::{
    make_missingness, metrics, simulate_matern_field, true_spectrum, CirculantSimulator, Method, Metrics,
    MissingSetting,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::lattice::{embed_mask, LatticeSpec, ObservationMask, Shape};
use crate::spectral::{periodic_cov_from_spectrum, PeriodicCovariance, SpectrumGrid, SPECTRUM_FLOOR};

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Dense pieces of the study: the true covariance `K` of the observed
/// values and the blocks of the periodic covariance under `f_true`.
#[derive(Debug, Clone)]
pub struct DenseModel {
    spec: LatticeSpec,
    mask: ObservationMask,
    observed: Vec<usize>,
    missing: Vec<usize>,
    f_true: SpectrumGrid,
    pub k: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// Blocks `A`, `B`, `C` of the periodic covariance, ordered by the
/// observed and missing cells of `mask`.
pub fn dense_blocks(cov: &PeriodicCovariance, mask: &ObservationMask) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if cov.dims() != mask.dims() {
        return Err(Error::mismatch(cov.dims(), mask.dims()));
    }
    let shape = mask.shape();
    let obs: Vec<Vec<usize>> = mask.observed_indices().iter().map(|&i| shape.index_of(i)).collect();
    let mis: Vec<Vec<usize>> = mask.missing_indices().iter().map(|&i| shape.index_of(i)).collect();
    let block = |r: &[Vec<usize>], c: &[Vec<usize>]| DMatrix::from_fn(r.len(), c.len(), |i, j| cov.between(&r[i], &c[j]));
    Ok((block(&obs, &obs), block(&obs, &mis), block(&mis, &mis)))
}

pub fn build_dense_model<F>(cov_fn: F, f_true: &SpectrumGrid, mask_y: &ObservationMask, spec: &LatticeSpec) -> Result<DenseModel>
where
    F: Fn(&[f64]) -> f64,
{
    build_dense_model_capped(cov_fn, f_true, mask_y, spec, DEFAULT_DENSE_CAP)
}

pub fn build_dense_model_capped<F>(
    cov_fn: F,
    f_true: &SpectrumGrid,
    mask_y: &ObservationMask,
    spec: &LatticeSpec,
    cap: usize,
) -> Result<DenseModel>
where
    F: Fn(&[f64]) -> f64,
{
    if spec.m() > cap {
        return Err(Error::DenseCapExceeded { m: spec.m(), cap });
    }
    if f_true.dims() != spec.z() {
        return Err(Error::mismatch(spec.z(), f_true.dims()));
    }
    let mask = embed_mask(mask_y, spec)?;
    if mask.n_observed() == 0 {
        return Err(Error::NoObservations);
    }
    let observed = mask.observed_indices();
    let missing = mask.missing_indices();
    let shape = mask.shape();
    let coords: Vec<Vec<f64>> = observed
        .iter()
        .map(|&i| shape.index_of(i).iter().map(|&v| v as f64).collect())
        .collect();
    let mut lag = vec![0.0; spec.d()];
    let k = DMatrix::from_fn(observed.len(), observed.len(), |i, j| {
        for (l, (a, b)) in lag.iter_mut().zip(coords[i].iter().zip(&coords[j])) {
            *l = a - b;
        }
        cov_fn(&lag)
    });
    let cov = periodic_cov_from_spectrum(&f_true.floored(SPECTRUM_FLOOR))?;
    let (a, b, c) = dense_blocks(&cov, &mask)?;
    Ok(DenseModel {
        spec: spec.clone(),
        mask,
        observed,
        missing,
        f_true: f_true.clone(),
        k,
        a,
        b,
        c,
    })
}

impl DenseModel {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// Observation pattern on the embedding lattice.
    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn f_true(&self) -> &SpectrumGrid {
        &self.f_true
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    /// `(m/n) [K 0; 0 0]` over the embedding lattice.
    pub fn initial_matrix(&self) -> DMatrix<f64> {
        let scale = self.m() as f64 / self.n_observed() as f64;
        let mut s = DMatrix::zeros(self.m(), self.m());
        for (i, &p) in self.observed.iter().enumerate() {
            for (j, &q) in self.observed.iter().enumerate() {
                s[(p, q)] = scale * self.k[(i, j)];
            }
        }
        s
    }

    /// Second-moment matrix of the imputed field when the imputations use
    /// the periodic model with spectrum `f_k` and the data have covariance `K`:
    /// `[K, K A⁻¹B; BᵀA⁻¹K, C + BᵀA⁻¹(K − A)A⁻¹B]` with blocks under `f_k`.
    pub fn study_matrix(&self, f_k: &SpectrumGrid) -> Result<DMatrix<f64>> {
        if f_k.dims() != self.spec.z() {
            return Err(Error::mismatch(self.spec.z(), f_k.dims()));
        }
        let cov = periodic_cov_from_spectrum(&f_k.floored(SPECTRUM_FLOOR))?;
        let (a, b, c) = dense_blocks(&cov, &self.mask)?;
        let n = self.observed.len();
        let w = self.missing.len();
        let mut s = DMatrix::zeros(self.m(), self.m());
        for (i, &p) in self.observed.iter().enumerate() {
            for (j, &q) in self.observed.iter().enumerate() {
                s[(p, q)] = self.k[(i, j)];
            }
        }
        if w == 0 {
            return Ok(s);
        }
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("observed block of the study covariance".into()))?;
        let aib = chol.solve(&b);
        let kaib = &self.k * &aib;
        let diff = &self.k - &a;
        let lower = c + aib.transpose() * (&diff * &aib);
        for (i, &p) in self.observed.iter().enumerate() {
            for (j, &q) in self.missing.iter().enumerate() {
                s[(p, q)] = kaib[(i, j)];
                s[(q, p)] = kaib[(i, j)];
            }
        }
        for (i, &p) in self.missing.iter().enumerate() {
            for (j, &q) in self.missing.iter().enumerate() {
                s[(p, q)] = lower[(i, j)];
            }
        }
        debug_assert_eq!(n + w, self.m());
        Ok(s)
    }
}

/// `f(ν, ω) = g(ν)† S g(ω)` over all pairs of Fourier frequencies, with
/// `g(ω)_x = m^{-1/2} exp(2πi ω·x)`.
#[derive(Debug, Clone)]
pub struct BispectrumMatrix {
    shape: Shape,
    /// Row-major over `(ν, ω)`.
    values: Vec<Complex64>,
}

impl BispectrumMatrix {
    pub fn m(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn get(&self, nu: usize, omega: usize) -> Complex64 {
        self.values[nu * self.m() + omega]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Real part of the diagonal, symmetrized; negative roundoff is clamped.
    pub fn diagonal(&self) -> SpectrumGrid {
        let m = self.m();
        let d = (0..m).map(|i| self.values[i * m + i].re).collect();
        SpectrumGrid::symmetrized(self.shape.clone(), d)
    }
}

fn transpose(src: &[Complex64], m: usize) -> Vec<Complex64> {
    const BLOCK: usize = 32;
    let mut dst = vec![Complex64::default(); m * m];
    for ib in (0..m).step_by(BLOCK) {
        for jb in (0..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                for j in jb..(jb + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
    dst
}

/// `F† S F / m` by transforming every row and then every column.
pub fn bispectrum_of(s: &DMatrix<f64>, dims: &[usize]) -> Result<BispectrumMatrix> {
    let fft = FftNd::new(dims);
    let m = fft.len();
    if s.nrows() != m || s.ncols() != m {
        return Err(Error::mismatch((m, m), (s.nrows(), s.ncols())));
    }
    let mut buf = vec![Complex64::default(); m * m];
    buf.par_chunks_mut(m).enumerate().for_each(|(x, row)| {
        for (y, v) in row.iter_mut().enumerate() {
            *v = Complex64::new(s[(x, y)], 0.0);
        }
        fft.inverse(row);
    });
    // rows now hold T(x, ω) = Σ_y S(x, y) exp(2πi ω·y)
    let mut t = transpose(&buf, m);
    drop(buf);
    let inv_m = 1.0 / m as f64;
    t.par_chunks_mut(m).for_each(|row| {
        fft.forward(row);
        for v in row.iter_mut() {
            *v *= inv_m;
        }
    });
    // rows of `t` are indexed by ω; flip back to (ν, ω)
    Ok(BispectrumMatrix {
        shape: fft.shape().clone(),
        values: transpose(&t, m),
    })
}

/// `(1/m) Σ_ν Σ_ω |f_k(ν,ω) − f(ν,ω)|² / (f(ν) f(ω))` with `f(ν,ω)` the
/// diagonal matrix of `f_true`.
pub fn insb(fk: &BispectrumMatrix, f_true: &SpectrumGrid) -> Result<f64> {
    let m = fk.m();
    if f_true.len() != m {
        return Err(Error::mismatch(m, f_true.len()));
    }
    let f = f_true.values();
    if f.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("true spectrum must be positive"));
    }
    let total: f64 = (0..m)
        .into_par_iter()
        .map(|nu| {
            let row = &fk.values[nu * m..(nu + 1) * m];
            let mut acc = 0.0;
            for (om, v) in row.iter().enumerate() {
                let mut d = *v;
                if om == nu {
                    d.re -= f[nu];
                }
                acc += d.norm_sqr() / f[om];
            }
            acc / f[nu]
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / m as f64)
}

/// Largest `|f_k(ν,ω) − f(ν,ω)|` over all pairs.
pub fn max_bispectrum_error(fk: &BispectrumMatrix, f_true: &SpectrumGrid) -> Result<f64> {
    let m = fk.m();
    if f_true.len() != m {
        return Err(Error::mismatch(m, f_true.len()));
    }
    let mut worst = 0.0f64;
    for nu in 0..m {
        for om in 0..m {
            let mut d = fk.get(nu, om);
            if nu == om {
                d.re -= f_true.values()[nu];
            }
            worst = worst.max(d.norm());
        }
    }
    Ok(worst)
}

/// Bias of the study sequence: entry `k` is the integrated normalized
/// squared bias of `f_k`, for `k = 0..=iterations`.
pub fn run_study(model: &DenseModel, iterations: usize) -> Result<Vec<f64>> {
    let dims = model.spec.z().to_vec();
    let mut fk = bispectrum_of(&model.initial_matrix(), &dims)?;
    let mut out = vec![insb(&fk, &model.f_true)?];
    for _ in 0..iterations {
        let s = model.study_matrix(&fk.diagonal())?;
        fk = bispectrum_of(&s, &dims)?;
        out.push(insb(&fk, &model.f_true)?);
    }
    Ok(out)
}
