//! Spectral densities on the Fourier frequencies of a lattice, periodic
//! covariances, parametric spectra, periodograms and circular smoothing.
//!
//! Sign conventions: analysis uses `exp(-2πi ν·x)`; synthesis of the
//! periodic covariance uses `exp(+2πi ω·h)` with a `1/m` factor.

mod kernel;
mod matern;

pub use kernel::{build_kernel, smooth, smoothed_sd, SmoothingKernel};
pub(crate) use kernel::smooth_spectrum;
pub use matern::{bessel_k, ln_gamma, matern_cov, matern_cov_dist, MaternParams};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::lattice::{GridField, LatticeSpec, Shape};

/// Relative tolerance for the real-field symmetry `f(k) = f(-k)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative floor applied to every spectrum used for imputation.
pub const SPECTRUM_FLOOR: f64 = 1e-8;

/// Nonnegative spectral density values over the Fourier frequencies of a
/// lattice, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    shape: Shape,
    values: Vec<f64>,
}

impl SpectrumGrid {
    /// Validates finiteness, nonnegativity and real-field symmetry, then
    /// symmetrizes exactly.
    pub fn new(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims);
        if values.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrum values must be finite"));
        }
        if let Some(v) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::invalid(format!("spectrum values must be nonnegative, got {v}")));
        }
        let scale = values.iter().fold(0.0f64, |a, &b| a.max(b));
        for k in 0..values.len() {
            let kk = shape.negated(k);
            if (values[k] - values[kk]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "spectrum violates real-field symmetry at index {k}: {} vs {}",
                    values[k], values[kk]
                )));
            }
        }
        Ok(Self::symmetrized(shape, values))
    }

    pub fn constant(dims: &[usize], value: f64) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims, vec![value; len])
    }

    /// Builds from values known to be symmetric up to roundoff; tiny
    /// negative roundoff is clamped to zero.
    pub(crate) fn symmetrized(shape: Shape, mut values: Vec<f64>) -> Self {
        for k in 0..values.len() {
            let kk = shape.negated(k);
            if kk > k {
                let avg = 0.5 * (values[k] + values[kk]);
                values[k] = avg;
                values[kk] = avg;
            }
        }
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        SpectrumGrid { shape, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Copy with every value raised to at least `rel * mean`.
    pub fn floored(&self, rel: f64) -> SpectrumGrid {
        let floor = rel * self.mean();
        SpectrumGrid {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| v.max(floor)).collect(),
        }
    }
}

/// Periodic covariance `R(h)` over lags `h` on the embedding lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCovariance {
    shape: Shape,
    values: Vec<f64>,
}

impl PeriodicCovariance {
    pub fn new(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims);
        if values.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance values must be finite"));
        }
        let scale = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for h in 0..values.len() {
            let hh = shape.negated(h);
            if (values[h] - values[hh]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "covariance is not even under periodic reflection at lag {h}"
                )));
            }
        }
        let mut out = PeriodicCovariance { shape, values };
        out.symmetrize();
        Ok(out)
    }

    fn symmetrize(&mut self) {
        for h in 0..self.values.len() {
            let hh = self.shape.negated(h);
            if hh > h {
                let avg = 0.5 * (self.values[h] + self.values[hh]);
                self.values[h] = avg;
                self.values[hh] = avg;
            }
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Covariance between lattice cells `a` and `b`.
    pub fn between(&self, a: &[usize], b: &[usize]) -> f64 {
        self.values[self.shape.periodic_lag(a, b)]
    }

    pub fn variance(&self) -> f64 {
        self.values[0]
    }
}

/// `R(h) = (1/m) Σ_ω f(ω) exp(2πi ω·h)`.
pub fn periodic_cov_from_spectrum(f: &SpectrumGrid) -> Result<PeriodicCovariance> {
    let fft = FftNd::new(f.dims());
    let m = f.len() as f64;
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.inverse(&mut buf);
    let r0 = buf[0].re / m;
    let resid = buf.iter().fold(0.0f64, |a, c| a.max(c.im.abs())) / m;
    if resid > 1e-10 * r0.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NumericalBreakdown(format!(
            "imaginary residue {resid:.3e} in periodic covariance"
        )));
    }
    let mut out = PeriodicCovariance {
        shape: f.shape().clone(),
        values: buf.iter().map(|c| c.re / m).collect(),
    };
    out.symmetrize();
    Ok(out)
}

/// `f(ω) = Σ_h R(h) exp(-2πi ω·h)`.
pub fn spectrum_from_cov(r: &PeriodicCovariance) -> Result<SpectrumGrid> {
    let fft = FftNd::new(r.dims());
    let buf = fft.forward_real(r.values());
    let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let scale = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if let Some((k, &v)) = values
        .iter()
        .enumerate()
        .find(|(_, &v)| v < -SYMMETRY_TOL * scale)
    {
        return Err(Error::NotPositiveDefinite(format!(
            "spectrum value {v:.3e} at frequency index {k}"
        )));
    }
    Ok(SpectrumGrid::symmetrized(r.shape().clone(), values))
}

/// Largest wrap order tried before giving up on adaptive truncation.
const MAX_WRAP_ORDER: usize = 64;

/// Spectrum on `F_z` of the periodic covariance obtained by wrapping the
/// stationary covariance `cov_fn` onto the torus `J_z`:
/// `R(h) = Σ_{|k_j| <= k_max} K(h + k∘z)`.
///
/// With `k_max = None` the order doubles from 1 until the largest change in
/// `R` is below `1e-10 · R(0)`.
pub fn wrapped_true_spectrum<F>(cov_fn: F, spec: &LatticeSpec, k_max: Option<usize>) -> Result<SpectrumGrid>
where
    F: Fn(&[f64]) -> f64,
{
    let r = wrapped_covariance(&cov_fn, spec.z(), k_max)?;
    spectrum_from_cov(&r)
}

pub fn wrapped_covariance<F>(cov_fn: &F, z: &[usize], k_max: Option<usize>) -> Result<PeriodicCovariance>
where
    F: Fn(&[f64]) -> f64,
{
    let shape = Shape::new(z);
    let mut values = vec![0.0; shape.len()];
    match k_max {
        Some(k) => {
            add_wrap_shell(cov_fn, &shape, &mut values, None, k);
        }
        None => {
            add_wrap_shell(cov_fn, &shape, &mut values, None, 1);
            let mut k = 1;
            loop {
                let next = 2 * k;
                let change = add_wrap_shell(cov_fn, &shape, &mut values, Some(k), next);
                k = next;
                if change < 1e-10 * values[0].abs() {
                    break;
                }
                if k >= MAX_WRAP_ORDER {
                    return Err(Error::invalid(format!(
                        "covariance wrap did not converge by order {k} (last change {change:.3e})"
                    )));
                }
            }
        }
    }
    PeriodicCovariance::new(z, values)
}

/// Adds `K(h + s∘z)` for all shifts with `inner < max|s_j| <= outer` and
/// returns the largest absolute change.
fn add_wrap_shell<F>(cov_fn: &F, shape: &Shape, values: &mut [f64], inner: Option<usize>, outer: usize) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let d = shape.ndim();
    let side = 2 * outer + 1;
    let n_shifts = side.pow(d as u32);
    let mut delta = vec![0.0; values.len()];
    let mut shift = vec![0i64; d];
    let mut idx = vec![0usize; d];
    let mut lag = vec![0.0; d];
    for s in 0..n_shifts {
        let mut rem = s;
        for j in (0..d).rev() {
            shift[j] = (rem % side) as i64 - outer as i64;
            rem /= side;
        }
        let order = shift.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
        if let Some(inner) = inner {
            if order <= inner {
                continue;
            }
        }
        for (h, dv) in delta.iter_mut().enumerate() {
            shape.unravel(h, &mut idx);
            for j in 0..d {
                lag[j] = idx[j] as f64 + (shift[j] * shape.dims()[j] as i64) as f64;
            }
            *dv += cov_fn(&lag);
        }
    }
    let mut change = 0.0f64;
    for (v, dv) in values.iter_mut().zip(&delta) {
        *v += dv;
        change = change.max(dv.abs());
    }
    change
}

/// Quasi-Matérn spectrum `1 / (1 - (θ/d) Σ_j cos 2πω_j)`; for `d = 2` this
/// is `1 / (1 - (θ/2)(cos 2πω_1 + cos 2πω_2))`.
pub fn ar1_spectrum(theta: f64, dims: &[usize]) -> Result<SpectrumGrid> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1), got {theta}")));
    }
    let shape = Shape::new(dims);
    let values = ar1_values(theta, &shape);
    Ok(SpectrumGrid::symmetrized(shape, values))
}

pub(crate) fn ar1_values(theta: f64, shape: &Shape) -> Vec<f64> {
    let d = shape.ndim() as f64;
    // per-axis cosine tables keep this O(m)
    let cosines: Vec<Vec<f64>> = shape
        .dims()
        .iter()
        .map(|&n| (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect())
        .collect();
    let mut idx = vec![0; shape.ndim()];
    (0..shape.len())
        .map(|lin| {
            shape.unravel(lin, &mut idx);
            let s: f64 = idx.iter().zip(&cosines).map(|(&k, c)| c[k]).sum();
            1.0 / (1.0 - theta / d * s)
        })
        .collect()
}

/// Periodogram `|J(ν)|²` with `J(ν) = m^{-1/2} Σ_x field(x) exp(-2πi ν·x)`.
pub fn periodogram(field: &GridField) -> SpectrumGrid {
    let fft = FftNd::new(field.dims());
    periodogram_with(&fft, field.values())
}

pub(crate) fn periodogram_with(fft: &FftNd, values: &[f64]) -> SpectrumGrid {
    let m = values.len() as f64;
    let buf = fft.forward_real(values);
    let out = buf.iter().map(|c| c.norm_sqr() / m).collect();
    SpectrumGrid::symmetrized(fft.shape().clone(), out)
}
