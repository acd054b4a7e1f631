//! Non-iterative reference estimators on the observation lattice: the
//! zero-infill periodogram and the cosine-tapered periodogram.

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::lattice::{ObservationMask, Shape};
use crate::spectral::{smooth_spectrum, SmoothingKernel, SpectrumGrid};

/// Taper weights over the observation lattice, zero at missing cells.
#[derive(Debug, Clone)]
pub struct TaperGrid {
    mask: ObservationMask,
    weights: Vec<f64>,
    p: f64,
}

impl TaperGrid {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn dims(&self) -> &[usize] {
        self.mask.dims()
    }

    pub fn edge_fraction(&self) -> f64 {
        self.p
    }

    pub fn sum_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

fn scatter(data: &[f64], mask: &ObservationMask, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    if data.len() != mask.n_observed() {
        return Err(Error::mismatch(mask.n_observed(), data.len()));
    }
    let mut out = vec![0.0; mask.len()];
    for (&i, &v) in mask.observed_indices().iter().zip(data) {
        out[i] = match weights {
            Some(w) => w[i] * v,
            None => v,
        };
    }
    Ok(out)
}

fn power(values: &[f64], dims: &[usize], norm: f64) -> Vec<f64> {
    let fft = FftNd::new(dims);
    fft.forward_real(values).iter().map(|c| c.norm_sqr() / norm).collect()
}

/// `|n^{-1/2} Σ_{observed x} data(x) exp(-2πi ν·x)|²` over the Fourier
/// frequencies of the observation lattice.
pub fn zero_infill_raw(data: &[f64], mask: &ObservationMask) -> Result<SpectrumGrid> {
    let n = mask.n_observed();
    if n == 0 {
        return Err(Error::NoObservations);
    }
    let values = scatter(data, mask, None)?;
    Ok(SpectrumGrid::symmetrized(mask.shape().clone(), power(&values, mask.dims(), n as f64)))
}

/// Smoothed zero-infill periodogram.
pub fn zero_infill_periodogram(data: &[f64], mask: &ObservationMask, kernel: &SmoothingKernel) -> Result<SpectrumGrid> {
    if kernel.dims() != mask.dims() {
        return Err(Error::mismatch(mask.dims(), kernel.dims()));
    }
    let raw = zero_infill_raw(data, mask)?;
    Ok(smooth_spectrum(raw.values(), kernel))
}

/// Split cosine bell ramp of width `w`: `0.5(1 − cos(π(2i−1)/(2w)))` for
/// `i = 1..=w`, then 1.
pub fn cosine_ramp(i: usize, w: usize) -> f64 {
    if i == 0 {
        return 0.0;
    }
    if i > w {
        return 1.0;
    }
    0.5 * (1.0 - (std::f64::consts::PI * (2 * i - 1) as f64 / (2 * w) as f64).cos())
}

/// One-dimensional taper of length `n` with `⌈p n⌉` tapered cells on each end.
pub fn edge_taper(n: usize, p: f64) -> Vec<f64> {
    let w = (p * n as f64).ceil() as usize;
    (0..n).map(|i| cosine_ramp(i + 1, w).min(cosine_ramp(n - i, w))).collect()
}

/// Outer product of per-axis edge tapers, zeroed at missing cells. With
/// `interior`, observed cells within `⌈p·min y_j⌉` (Chebyshev distance) of a
/// missing cell are additionally rolled off along the same ramp.
pub fn build_taper(mask: &ObservationMask, p: f64, interior: bool) -> Result<TaperGrid> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::invalid(format!("taper fraction must lie in (0, 0.5), got {p}")));
    }
    let shape = mask.shape();
    let dims = shape.dims();
    let axes: Vec<Vec<f64>> = dims.iter().map(|&n| edge_taper(n, p)).collect();
    let mut idx = vec![0; dims.len()];
    let mut weights: Vec<f64> = (0..shape.len())
        .map(|lin| {
            if !mask.is_observed(lin) {
                return 0.0;
            }
            shape.unravel(lin, &mut idx);
            idx.iter().zip(&axes).map(|(&i, t)| t[i]).product()
        })
        .collect();
    if interior {
        let w = (p * *dims.iter().min().unwrap() as f64).ceil() as usize;
        let dist = chebyshev_to_missing(mask, w);
        for (t, d) in weights.iter_mut().zip(dist) {
            *t *= cosine_ramp(d, w);
        }
    }
    Ok(TaperGrid {
        mask: mask.clone(),
        weights,
        p,
    })
}

/// Chebyshev distance to the nearest missing cell, capped at `w + 1`.
fn chebyshev_to_missing(mask: &ObservationMask, w: usize) -> Vec<usize> {
    let shape: &Shape = mask.shape();
    let dims = shape.dims();
    let d = dims.len();
    let cap = w + 1;
    let mut dist = vec![cap; shape.len()];
    let side = 2 * w + 1;
    let n_off = side.pow(d as u32);
    let mut target = vec![0usize; d];
    for lin in mask.missing_indices() {
        let here = shape.index_of(lin);
        'offsets: for o in 0..n_off {
            let mut rem = o;
            let mut cheb = 0;
            for j in (0..d).rev() {
                let off = (rem % side) as i64 - w as i64;
                rem /= side;
                let t = here[j] as i64 + off;
                if t < 0 || t >= dims[j] as i64 {
                    continue 'offsets;
                }
                target[j] = t as usize;
                cheb = cheb.max(off.unsigned_abs() as usize);
            }
            let q = shape.ravel(&target);
            dist[q] = dist[q].min(cheb);
        }
    }
    dist
}

/// `|Σ_x T(x) data(x) exp(-2πi ν·x)|² / Σ_x T(x)²`.
pub fn tapered_raw(data: &[f64], taper: &TaperGrid) -> Result<SpectrumGrid> {
    let norm = taper.sum_sq();
    if !(norm > 0.0) {
        return Err(Error::invalid("taper is identically zero"));
    }
    let values = scatter(data, &taper.mask, Some(&taper.weights))?;
    Ok(SpectrumGrid::symmetrized(taper.mask.shape().clone(), power(&values, taper.dims(), norm)))
}

/// Smoothed tapered periodogram.
pub fn tapered_periodogram(data: &[f64], taper: &TaperGrid, kernel: &SmoothingKernel) -> Result<SpectrumGrid> {
    if kernel.dims() != taper.dims() {
        return Err(Error::mismatch(taper.dims(), kernel.dims()));
    }
    let raw = tapered_raw(data, taper)?;
    Ok(smooth_spectrum(raw.values(), kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_power(values: &[f64], dims: &[usize], norm: f64) -> Vec<f64> {
        let shape = Shape::new(dims);
        (0..shape.len())
            .map(|w| {
                let wi = shape.index_of(w);
                let (mut re, mut im) = (0.0, 0.0);
                for (x, &v) in values.iter().enumerate() {
                    let xi = shape.index_of(x);
                    let phase: f64 = (0..dims.len())
                        .map(|j| wi[j] as f64 * xi[j] as f64 / dims[j] as f64)
                        .sum::<f64>()
                        * 2.0
                        * std::f64::consts::PI;
                    re += v * phase.cos();
                    im -= v * phase.sin();
                }
                (re * re + im * im) / norm
            })
            .collect()
    }

    fn random_mask(dims: &[usize], frac: f64, seed: u64) -> ObservationMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let mut obs: Vec<bool> = (0..n).map(|_| rng.random::<f64>() >= frac).collect();
        obs[0] = true;
        ObservationMask::new(dims, obs).unwrap()
    }

    #[test]
    fn single_cell_is_flat() {
        let mut obs = vec![false; 20];
        obs[7] = true;
        let mask = ObservationMask::new(&[4, 5], obs).unwrap();
        let p = zero_infill_raw(&[3.0], &mask).unwrap();
        assert!(p.values().iter().all(|&v| (v - 9.0).abs() < 1e-12));
    }

    #[test]
    fn zero_infill_matches_direct_sum() {
        let dims = [6, 7];
        let mask = random_mask(&dims, 0.5, 2);
        let data: Vec<f64> = (0..mask.n_observed()).map(|i| (i as f64 * 0.7).sin() + 0.2).collect();
        let got = zero_infill_raw(&data, &mask).unwrap();
        let full = scatter(&data, &mask, None).unwrap();
        let want = direct_power(&full, &dims, mask.n_observed() as f64);
        for (a, b) in got.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_values() {
        // w = 2: 0.5(1 - cos(π/4)), 0.5(1 - cos(3π/4))
        let r1 = 0.5 * (1.0 - (std::f64::consts::PI / 4.0).cos());
        let r2 = 0.5 * (1.0 - (3.0 * std::f64::consts::PI / 4.0).cos());
        assert!((cosine_ramp(1, 2) - r1).abs() < 1e-15);
        assert!((cosine_ramp(2, 2) - r2).abs() < 1e-15);
        assert_eq!(cosine_ramp(3, 2), 1.0);
        let t = edge_taper(40, 0.05);
        assert!((t[0] - r1).abs() < 1e-15 && (t[39] - r1).abs() < 1e-15);
        assert!((t[1] - r2).abs() < 1e-15 && (t[38] - r2).abs() < 1e-15);
        assert!(t[2..38].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn taper_shape() {
        let mut obs = vec![true; 400];
        obs[10 * 20 + 10] = false;
        let mask = ObservationMask::new(&[20, 20], obs).unwrap();
        let t = build_taper(&mask, 0.05, false).unwrap();
        let w = t.weights();
        let r1 = cosine_ramp(1, 1);
        assert!((w[0] - r1 * r1).abs() < 1e-15 && w[0] < 1.0);
        assert_eq!(w[5 * 20 + 5], 1.0);
        assert_eq!(w[10 * 20 + 10], 0.0);
        assert_eq!(w[10 * 20 + 11], 1.0);

        let ti = build_taper(&mask, 0.05, true).unwrap();
        assert!(ti.weights()[10 * 20 + 11] < 1.0);
        assert!(ti.weights()[11 * 20 + 11] < 1.0);
        assert_eq!(ti.weights()[10 * 20 + 13], 1.0);
        assert!(build_taper(&mask, 0.5, false).is_err());
        assert!(build_taper(&mask, 0.0, false).is_err());
    }

    #[test]
    fn tapered_matches_direct_sum() {
        let dims = [8, 6];
        let mask = random_mask(&dims, 0.3, 4);
        let data: Vec<f64> = (0..mask.n_observed()).map(|i| (i as f64).cos()).collect();
        let taper = build_taper(&mask, 0.2, true).unwrap();
        let got = tapered_raw(&data, &taper).unwrap();
        let full = scatter(&data, &mask, Some(taper.weights())).unwrap();
        let want = direct_power(&full, &dims, taper.sum_sq());
        for (a, b) in got.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_taper_equals_zero_infill() {
        let dims = [7, 5];
        let mask = ObservationMask::all_observed(&dims);
        let data: Vec<f64> = (0..35).map(|i| (i as f64 * 1.3).sin()).collect();
        let taper = TaperGrid {
            mask: mask.clone(),
            weights: vec![1.0; 35],
            p: 0.1,
        };
        let k = SmoothingKernel::new(0.2, &dims).unwrap();
        let a = tapered_periodogram(&data, &taper, &k).unwrap();
        let b = zero_infill_periodogram(&data, &mask, &k).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_tapered_level() {
        let dims = [64, 64];
        let mask = random_mask(&dims, 0.3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c: f64 = 2.0;
        let data: Vec<f64> = (0..mask.n_observed())
            .map(|_| c.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let taper = build_taper(&mask, 0.05, false).unwrap();
        let raw = tapered_raw(&data, &taper).unwrap();
        assert!((raw.mean() - c).abs() < 0.1, "mean {}", raw.mean());
    }

    #[test]
    fn rejects_zero_taper() {
        let mask = ObservationMask::new(&[2, 2], vec![true, false, false, false]).unwrap();
        let taper = TaperGrid {
            mask,
            weights: vec![0.0; 4],
            p: 0.1,
        };
        assert!(tapered_raw(&[1.0], &taper).is_err());
    }
}
