use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::lattice::{LatticeSpec, Shape};
use crate::spectral::SpectrumGrid;

/// Gaussian smoothing kernel on the frequency torus, normalized to sum 1.
///
/// The unnormalized weight at lag `ν` is `exp(-|ν|²/δ²)` with `|ν|` the
/// Euclidean norm of the componentwise circular distances.
#[derive(Debug, Clone)]
pub struct SmoothingKernel {
    delta: f64,
    weights: Vec<f64>,
    transfer: Vec<f64>,
    transfer_sq: Vec<f64>,
    sum_sq: f64,
    fft: FftNd,
}

pub fn build_kernel(delta: f64, spec: &LatticeSpec) -> Result<SmoothingKernel> {
    SmoothingKernel::new(delta, spec.z())
}

impl SmoothingKernel {
    pub fn new(delta: f64, dims: &[usize]) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {delta}")));
        }
        let shape = Shape::new(dims);
        let mut idx = vec![0; shape.ndim()];
        let mut weights: Vec<f64> = (0..shape.len())
            .map(|lin| {
                shape.unravel(lin, &mut idx);
                let d2: f64 = idx
                    .iter()
                    .zip(dims)
                    .map(|(&k, &n)| {
                        let w = k as f64 / n as f64;
                        let c = w.min(1.0 - w);
                        c * c
                    })
                    .sum();
                (-d2 / (delta * delta)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let sum_sq = weights.iter().map(|w| w * w).sum();
        let fft = FftNd::new(dims);
        // The kernel is even, so its transform is real.
        let transfer = fft.forward_real(&weights).iter().map(|c| c.re).collect();
        let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
        let transfer_sq = fft.forward_real(&sq).iter().map(|c| c.re).collect();
        Ok(SmoothingKernel {
            delta,
            weights,
            transfer,
            transfer_sq,
            sum_sq,
            fft,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dims(&self) -> &[usize] {
        self.fft.shape().dims()
    }

    pub fn shape(&self) -> &Shape {
        self.fft.shape()
    }

    /// Normalized weights `α(ν)` indexed by lag.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_ν α(ν)²`.
    pub fn sum_sq(&self) -> f64 {
        self.sum_sq
    }

    pub(crate) fn fft(&self) -> &FftNd {
        &self.fft
    }

    fn convolve(&self, values: &[f64], transfer: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), transfer.len(), "grid does not match kernel shape");
        let mut buf = self.fft.forward_real(values);
        for (b, &t) in buf.iter_mut().zip(transfer) {
            *b *= t;
        }
        self.fft.inverse(&mut buf);
        let m = values.len() as f64;
        buf.iter().map(|c: &Complex64| c.re / m).collect()
    }
}

/// Circular convolution `Σ_ν values(ν) α(ω - ν)`.
pub fn smooth(values: &[f64], kernel: &SmoothingKernel) -> Vec<f64> {
    kernel.convolve(values, &kernel.transfer)
}

/// `S(ω) = (Σ_ν f(ν)² α(ω - ν)²)^{1/2}`, the asymptotic standard deviation of
/// the complete-data smoothed periodogram.
pub fn smoothed_sd(f: &SpectrumGrid, kernel: &SmoothingKernel) -> Vec<f64> {
    let sq: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    kernel
        .convolve(&sq, &kernel.transfer_sq)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

/// Smoothing that returns a spectrum; inputs must be nonnegative and
/// symmetric, which smoothing preserves up to roundoff.
pub(crate) fn smooth_spectrum(values: &[f64], kernel: &SmoothingKernel) -> SpectrumGrid {
    SpectrumGrid::symmetrized(kernel.shape().clone(), smooth(values, kernel))
}
