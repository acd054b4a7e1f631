//! Vecchia approximation to the inverse of the observed covariance block.
//!
//! Observed cells are taken in row-major order. Each cell is regressed on
//! its nearest previously ordered observed cells (Euclidean distance on
//! lattice coordinates, no wrap), which gives a sparse factor `L` with
//! `A⁻¹ ≈ Lᵀ L`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{ObservationMask, Shape};
use crate::spectral::PeriodicCovariance;

const NOT_OBSERVED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct VecchiaPreconditioner {
    neighbors: usize,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    coefs: Vec<f64>,
    cond_sd: Vec<f64>,
}

struct Row {
    cols: Vec<u32>,
    coefs: Vec<f64>,
    cond_sd: f64,
}

pub fn build_vecchia_preconditioner(cov: &PeriodicCovariance, mask: &ObservationMask, neighbors: usize) -> Result<VecchiaPreconditioner> {
    if cov.dims() != mask.dims() {
        return Err(Error::mismatch(cov.dims(), mask.dims()));
    }
    if mask.n_observed() == 0 {
        return Err(Error::NoObservations);
    }
    let shape = mask.shape().clone();
    let observed = mask.observed_indices();
    let mut position = vec![NOT_OBSERVED; shape.len()];
    for (p, &lin) in observed.iter().enumerate() {
        position[lin] = p as u32;
    }
    let ctx = Context {
        shape: &shape,
        cov,
        observed: &observed,
        position: &position,
        neighbors,
    };
    let rows: Vec<Row> = (0..observed.len())
        .into_par_iter()
        .map(|p| ctx.row(p))
        .collect::<Result<_>>()?;

    let mut row_start = Vec::with_capacity(rows.len() + 1);
    let mut cols = Vec::new();
    let mut coefs = Vec::new();
    let mut cond_sd = Vec::with_capacity(rows.len());
    row_start.push(0);
    for row in rows {
        cols.extend_from_slice(&row.cols);
        coefs.extend_from_slice(&row.coefs);
        cond_sd.push(row.cond_sd);
        row_start.push(cols.len());
    }
    Ok(VecchiaPreconditioner {
        neighbors,
        row_start,
        cols,
        coefs,
        cond_sd,
    })
}

struct Context<'a> {
    shape: &'a Shape,
    cov: &'a PeriodicCovariance,
    observed: &'a [usize],
    position: &'a [u32],
    neighbors: usize,
}

impl Context<'_> {
    fn row(&self, p: usize) -> Result<Row> {
        let nbrs = self.nearest_previous(p);
        let here = self.shape.index_of(self.observed[p]);
        let coords: Vec<Vec<usize>> = nbrs
            .iter()
            .map(|&q| self.shape.index_of(self.observed[q as usize]))
            .collect();
        let k = nbrs.len();
        let var = self.cov.variance();
        if k == 0 {
            return Ok(Row {
                cols: Vec::new(),
                coefs: Vec::new(),
                cond_sd: var.sqrt(),
            });
        }
        let sigma = DMatrix::from_fn(k, k, |i, j| self.cov.between(&coords[i], &coords[j]));
        let cross = DVector::from_fn(k, |i, _| self.cov.between(&coords[i], &here));
        let jitter = 1e-10 * var;
        for attempt in 0..2 {
            let mut s = sigma.clone();
            let mut v = var;
            if attempt == 1 {
                for i in 0..k {
                    s[(i, i)] += jitter;
                }
                v += jitter;
            }
            if let Some(chol) = s.cholesky() {
                let b = chol.solve(&cross);
                let cond_var = v - cross.dot(&b);
                if cond_var > 0.0 && cond_var.is_finite() {
                    return Ok(Row {
                        cols: nbrs,
                        coefs: b.as_slice().to_vec(),
                        cond_sd: cond_var.sqrt(),
                    });
                }
            }
        }
        Err(Error::SingularSystem(p))
    }

    /// Up to `neighbors` previously ordered observed cells nearest to cell
    /// `p`, sorted by distance then by order.
    fn nearest_previous(&self, p: usize) -> Vec<u32> {
        let m_nb = self.neighbors;
        if m_nb == 0 || p == 0 {
            return Vec::new();
        }
        let lin = self.observed[p];
        let here = self.shape.index_of(lin);
        let dist2_to = |q: usize| -> usize {
            self.shape
                .index_of(q)
                .iter()
                .zip(&here)
                .map(|(&a, &b)| a.abs_diff(b).pow(2))
                .sum()
        };
        if p <= m_nb {
            let mut all: Vec<(usize, u32)> = (0..p).map(|q| (dist2_to(self.observed[q]), q as u32)).collect();
            all.sort_unstable();
            return all.into_iter().map(|(_, q)| q).collect();
        }
        let dims = self.shape.dims();
        let d = dims.len();
        let max_dim = *dims.iter().max().unwrap();
        let mut radius = 1usize.max(((m_nb as f64).powf(1.0 / d as f64)).ceil() as usize / 2);
        let mut candidates: Vec<(usize, u32)> = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            candidates.clear();
            // clipped box; previous cells never have a larger first coordinate
            let lo: Vec<usize> = here.iter().map(|&c| c.saturating_sub(radius)).collect();
            let hi: Vec<usize> = (0..d)
                .map(|j| {
                    if j == 0 {
                        here[0]
                    } else {
                        (here[j] + radius).min(dims[j] - 1)
                    }
                })
                .collect();
            idx.copy_from_slice(&lo);
            'walk: loop {
                let q = self.shape.ravel(&idx);
                if q < lin {
                    let pos = self.position[q];
                    if pos != NOT_OBSERVED {
                        candidates.push((dist2_to(q), pos));
                    }
                }
                // odometer over the box, last axis fastest
                let mut j = d;
                loop {
                    if j == 0 {
                        break 'walk;
                    }
                    j -= 1;
                    if idx[j] < hi[j] {
                        idx[j] += 1;
                        break;
                    }
                    idx[j] = lo[j];
                }
            }
            let covers_all = radius >= max_dim;
            if candidates.len() >= m_nb || covers_all {
                candidates.sort_unstable();
                candidates.truncate(m_nb);
                let enough = candidates.len() == m_nb && candidates[m_nb - 1].0 <= radius * radius;
                if enough || covers_all {
                    return candidates.into_iter().map(|(_, q)| q).collect();
                }
            }
            radius *= 2;
        }
    }
}

impl VecchiaPreconditioner {
    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn len(&self) -> usize {
        self.cond_sd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cond_sd.is_empty()
    }

    /// Conditional standard deviation of each observed cell given its neighbors.
    pub fn conditional_sds(&self) -> &[f64] {
        &self.cond_sd
    }

    /// Neighbor positions and regression coefficients of row `p`.
    pub fn row(&self, p: usize) -> (&[u32], &[f64]) {
        let r = self.row_start[p]..self.row_start[p + 1];
        (&self.cols[r.clone()], &self.coefs[r])
    }

    /// `L x` with `(L x)_i = (x_i - Σ_j b_ij x_j) / d_i`.
    pub fn apply_factor(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len());
        (0..self.len())
            .map(|i| {
                let (cols, coefs) = self.row(i);
                let pred: f64 = cols.iter().zip(coefs).map(|(&j, &b)| b * x[j as usize]).sum();
                (x[i] - pred) / self.cond_sd[i]
            })
            .collect()
    }

    /// `Lᵀ y`.
    pub fn apply_factor_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.len());
        let mut out = vec![0.0; y.len()];
        for i in 0..self.len() {
            let s = y[i] / self.cond_sd[i];
            out[i] += s;
            let (cols, coefs) = self.row(i);
            for (&j, &b) in cols.iter().zip(coefs) {
                out[j as usize] -= b * s;
            }
        }
        out
    }

    /// `Lᵀ L x`, an approximation to `A⁻¹ x`; symmetric positive definite.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_factor_transpose(&self.apply_factor(x))
    }
}
