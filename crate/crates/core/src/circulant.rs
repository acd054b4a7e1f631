//! Fast products with the periodic covariance `R = F D F†` on the embedding
//! lattice, its observed/missing sub-blocks, and exact sampling from
//! `N(0, R)`.
//!
//! With `U` the observed cells and `W` the rest, `R = [A B; Bᵀ C]`. The
//! permutation into that block order is never formed; scatter and gather
//! against the mask stand in for it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::lattice::{GridField, ObservationMask, Shape};
use crate::spectral::{periodic_cov_from_spectrum, PeriodicCovariance, SpectrumGrid, SPECTRUM_FLOOR};

#[derive(Debug, Clone)]
pub struct CirculantOperator {
    eigenvalues: Vec<f64>,
    fft: FftNd,
    observed: Vec<usize>,
    missing: Vec<usize>,
}

impl CirculantOperator {
    /// The spectrum is floored at `1e-8` times its mean before use.
    pub fn new(f: &SpectrumGrid, mask: &ObservationMask) -> Result<Self> {
        Self::with_fft(f, mask, FftNd::new(f.dims()))
    }

    pub fn with_fft(f: &SpectrumGrid, mask: &ObservationMask, fft: FftNd) -> Result<Self> {
        if f.dims() != mask.dims() {
            return Err(Error::mismatch(f.dims(), mask.dims()));
        }
        if fft.shape().dims() != f.dims() {
            return Err(Error::mismatch(f.dims(), fft.shape().dims()));
        }
        if !(f.mean() > 0.0) {
            return Err(Error::invalid("spectrum is identically zero"));
        }
        let eigenvalues = f.floored(SPECTRUM_FLOOR).into_values();
        Ok(CirculantOperator {
            eigenvalues,
            fft,
            observed: mask.observed_indices(),
            missing: mask.missing_indices(),
        })
    }

    pub fn shape(&self) -> &Shape {
        self.fft.shape()
    }

    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn n_missing(&self) -> usize {
        self.missing.len()
    }

    pub fn observed_indices(&self) -> &[usize] {
        &self.observed
    }

    pub fn missing_indices(&self) -> &[usize] {
        &self.missing
    }

    /// Floored spectrum used as the eigenvalues of `R`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Periodic covariance implied by the (floored) eigenvalues.
    pub fn covariance(&self) -> Result<PeriodicCovariance> {
        let f = SpectrumGrid::symmetrized(self.shape().clone(), self.eigenvalues.clone());
        periodic_cov_from_spectrum(&f)
    }

    fn apply_diag(&self, buf: &mut [Complex64], invert: bool) {
        self.fft.forward(buf);
        if invert {
            for (b, &e) in buf.iter_mut().zip(&self.eigenvalues) {
                *b /= e;
            }
        } else {
            for (b, &e) in buf.iter_mut().zip(&self.eigenvalues) {
                *b *= e;
            }
        }
        self.fft.inverse(buf);
        let m = self.m() as f64;
        for b in buf.iter_mut() {
            *b /= m;
        }
    }

    fn scatter_observed(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.observed.len(), "vector length must equal observed count");
        let mut buf = vec![Complex64::default(); self.m()];
        for (&i, &v) in self.observed.iter().zip(x) {
            buf[i] = Complex64::new(v, 0.0);
        }
        buf
    }

    /// `R v` over the whole embedding lattice.
    pub fn full_multiply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.m(), "vector length must equal lattice size");
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.apply_diag(&mut buf, false);
        buf.iter().map(|c| c.re).collect()
    }

    /// `A x`: observed-to-observed block.
    pub fn a_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = self.scatter_observed(x);
        self.apply_diag(&mut buf, false);
        self.observed.iter().map(|&i| buf[i].re).collect()
    }

    /// `Bᵀ x`: observed-to-missing block.
    pub fn bt_multiply(&self, x: &[f64]) -> Vec<f64> {
        if self.missing.is_empty() {
            return Vec::new();
        }
        let mut buf = self.scatter_observed(x);
        self.apply_diag(&mut buf, false);
        self.missing.iter().map(|&i| buf[i].re).collect()
    }

    /// `(A - B C⁻¹ Bᵀ)⁻¹ x`, the observed block of `R⁻¹`; used as the
    /// inverse-spectrum preconditioner.
    pub fn inv_multiply_observed(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = self.scatter_observed(x);
        self.apply_diag(&mut buf, true);
        self.observed.iter().map(|&i| buf[i].re).collect()
    }

    /// Exact draw from `N(0, R)` over the embedding lattice.
    ///
    /// Frequencies with every component in `{0, 1/2}` get a real Gaussian
    /// coefficient; each conjugate pair shares one complex coefficient, so a
    /// single inverse transform yields a real field.
    pub fn unconditional_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridField {
        let values = hermitian_sample(&self.fft, &self.eigenvalues, rng);
        GridField::from_parts(self.shape().clone(), values)
    }
}

/// Real field with covariance `(1/m) Σ_ω λ(ω) exp(2πi ω·h)`.
pub(crate) fn hermitian_sample<R: Rng + ?Sized>(fft: &FftNd, eigenvalues: &[f64], rng: &mut R) -> Vec<f64> {
    let shape = fft.shape();
    let m = eigenvalues.len();
    let mf = m as f64;
    let mut coef = vec![Complex64::default(); m];
    for k in 0..m {
        let kk = shape.negated(k);
        if kk == k {
            let a: f64 = rng.sample(StandardNormal);
            coef[k] = Complex64::new((eigenvalues[k] / mf).sqrt() * a, 0.0);
        } else if k < kk {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let s = (eigenvalues[k] / (2.0 * mf)).sqrt();
            coef[k] = Complex64::new(s * a, s * b);
            coef[kk] = coef[k].conj();
        }
    }
    fft.inverse(&mut coef);
    debug_assert!({
        let scale = (eigenvalues.iter().sum::<f64>() / mf).sqrt().max(f64::MIN_POSITIVE);
        coef.iter().all(|c| c.im.abs() <= 1e-10 * scale.max(1.0))
    });
    coef.iter().map(|c| c.re).collect()
}
