//! Multidimensional complex FFT over row-major buffers.
//!
//! Forward uses `exp(-2πi ν·x)`, inverse uses `exp(+2πi ν·x)`; neither is
//! normalized.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::Shape;

#[derive(Clone)]
pub struct FftNd {
    shape: Shape,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scratch_len: usize,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("dims", &self.shape.dims()).finish()
    }
}

impl FftNd {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward: Vec<_> = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse: Vec<_> = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        FftNd {
            shape: Shape::new(dims),
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.forward);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inverse);
    }

    /// Forward transform of a real array.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Transforms along one axis only.
    pub fn forward_axis(&self, buf: &mut [Complex64], axis: usize) {
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let mut line = Vec::new();
        self.run_axis(buf, axis, self.forward[axis].as_ref(), &mut scratch, &mut line);
    }

    pub fn inverse_axis(&self, buf: &mut [Complex64], axis: usize) {
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let mut line = Vec::new();
        self.run_axis(buf, axis, self.inverse[axis].as_ref(), &mut scratch, &mut line);
    }

    fn run(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(buf.len(), self.shape.len(), "buffer does not match FFT shape");
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let mut line = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            self.run_axis(buf, axis, plan.as_ref(), &mut scratch, &mut line);
        }
    }

    fn run_axis(
        &self,
        buf: &mut [Complex64],
        axis: usize,
        plan: &dyn Fft<f64>,
        scratch: &mut [Complex64],
        line: &mut Vec<Complex64>,
    ) {
        let n = self.shape.dims()[axis];
        if n == 1 {
            return;
        }
        let stride = self.shape.strides()[axis];
        if stride == 1 {
            // contiguous rows: rustfft processes consecutive chunks of length n
            plan.process_with_scratch(buf, scratch);
            return;
        }
        // Strided axis: gather a block of `stride` interleaved lines at a time.
        let block = n * stride;
        line.resize(block, Complex64::default());
        for chunk in buf.chunks_exact_mut(block) {
            for t in 0..stride {
                for i in 0..n {
                    line[t * n + i] = chunk[i * stride + t];
                }
            }
            plan.process_with_scratch(line, scratch);
            for t in 0..stride {
                for i in 0..n {
                    chunk[i * stride + t] = line[t * n + i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn direct_dft(shape: &Shape, x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); shape.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let ki = shape.index_of(k);
            for (p, &v) in x.iter().enumerate() {
                let pi = shape.index_of(p);
                let phase: f64 = ki
                    .iter()
                    .zip(&pi)
                    .zip(shape.dims())
                    .map(|((&a, &b), &n)| (a * b) as f64 / n as f64)
                    .sum();
                *o += v * Complex64::from_polar(1.0, sign * 2.0 * PI * phase);
            }
        }
        out
    }

    #[test]
    fn matches_direct_dft_3d() {
        let dims = [3, 4, 5];
        let fft = FftNd::new(&dims);
        let x: Vec<Complex64> = (0..60)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut f = x.clone();
        fft.forward(&mut f);
        let d = direct_dft(fft.shape(), &x, -1.0);
        for (a, b) in f.iter().zip(&d) {
            assert!((a - b).norm() < 1e-10);
        }
        let mut g = x.clone();
        fft.inverse(&mut g);
        let d = direct_dft(fft.shape(), &x, 1.0);
        for (a, b) in g.iter().zip(&d) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn roundtrip_scales_by_len() {
        let fft = FftNd::new(&[6, 1, 7]);
        let x: Vec<Complex64> = (0..42).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let mut y = x.clone();
        fft.forward(&mut y);
        fft.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a * 42.0 - b).norm() < 1e-9);
        }
    }
}
