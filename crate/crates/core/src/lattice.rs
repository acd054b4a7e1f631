//! Lattice geometry: observation and embedding hyperrectangles, Fourier
//! frequencies, row-major index maps and observation masks.
//!
//! Every multidimensional array in the crate uses one layout: the last
//! dimension varies fastest.

use crate::error::{Error, Result};

/// Row-major shape of a d-dimensional lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: &[usize]) -> Self {
        let mut strides = vec![1; dims.len()];
        for j in (0..dims.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * dims[j + 1];
        }
        let len = dims.iter().product();
        Shape {
            dims: dims.to_vec(),
            strides,
            len,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut linear: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = linear / s;
            linear %= s;
        }
    }

    pub fn index_of(&self, linear: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        self.unravel(linear, &mut out);
        out
    }

    /// Linear index of `(z - k) mod z`, the frequency conjugate to `k`.
    pub fn negated(&self, linear: usize) -> usize {
        let mut rem = linear;
        let mut out = 0;
        for (&n, &s) in self.dims.iter().zip(&self.strides) {
            let k = rem / s;
            rem %= s;
            out += ((n - k) % n) * s;
        }
        out
    }

    /// Linear index of the periodic lag `(a - b) mod dims`.
    pub fn periodic_lag(&self, a: &[usize], b: &[usize]) -> usize {
        let mut out = 0;
        for j in 0..self.dims.len() {
            let n = self.dims[j];
            out += ((a[j] + n - b[j]) % n) * self.strides[j];
        }
        out
    }

    /// True if `index` (a multi-index into a larger lattice) lies inside this shape.
    pub fn contains(&self, index: &[usize]) -> bool {
        index.iter().zip(&self.dims).all(|(i, n)| i < n)
    }
}

/// Observation lattice `y`, embedding lattice `z = ceil(tau * y)` and the
/// expansion factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    y: Vec<usize>,
    z: Vec<usize>,
    tau: f64,
}

/// Relative slack for `ceil(tau * y)` so that e.g. `1.1 * 80` lands on 88.
const CEIL_SLACK: f64 = 1e-9;

pub fn build_embedding(y: &[usize], tau: f64) -> Result<LatticeSpec> {
    LatticeSpec::new(y, tau)
}

impl LatticeSpec {
    pub fn new(y: &[usize], tau: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("lattice needs at least one dimension"));
        }
        if let Some(&bad) = y.iter().find(|&&v| v < 2) {
            return Err(Error::invalid(format!(
                "observation dims must be at least 2, got {bad}"
            )));
        }
        if !(tau >= 1.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("expansion factor must be >= 1, got {tau}")));
        }
        let z = y
            .iter()
            .map(|&v| {
                let t = tau * v as f64;
                ((t - CEIL_SLACK * t).ceil() as usize).max(v)
            })
            .collect();
        Ok(LatticeSpec {
            y: y.to_vec(),
            z,
            tau,
        })
    }

    /// Embedding lattice given directly, e.g. read off a spectrum grid.
    /// `tau` is reported as the largest ratio `z_j / y_j`.
    pub fn with_z(y: &[usize], z: &[usize]) -> Result<Self> {
        let base = Self::new(y, 1.0)?;
        if z.len() != y.len() {
            return Err(Error::mismatch(y.len(), z.len()));
        }
        if let Some(j) = (0..y.len()).find(|&j| z[j] < y[j]) {
            return Err(Error::invalid(format!(
                "embedding dim {} is smaller than observation dim {}",
                z[j], y[j]
            )));
        }
        let tau = y.iter().zip(z).map(|(&a, &b)| b as f64 / a as f64).fold(1.0, f64::max);
        Ok(LatticeSpec {
            z: z.to_vec(),
            tau,
            ..base
        })
    }

    pub fn d(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of cells on the embedding lattice.
    pub fn m(&self) -> usize {
        self.z.iter().product()
    }

    pub fn n_cells_y(&self) -> usize {
        self.y.iter().product()
    }

    pub fn y_shape(&self) -> Shape {
        Shape::new(&self.y)
    }

    pub fn z_shape(&self) -> Shape {
        Shape::new(&self.z)
    }
}

/// Fourier frequencies `k_j / z_j` of the embedding lattice, in layout order.
pub fn fourier_frequencies(spec: &LatticeSpec) -> Vec<Vec<f64>> {
    frequencies_of(&spec.z_shape())
}

pub fn frequencies_of(shape: &Shape) -> Vec<Vec<f64>> {
    let mut idx = vec![0; shape.ndim()];
    (0..shape.len())
        .map(|lin| {
            shape.unravel(lin, &mut idx);
            idx.iter()
                .zip(shape.dims())
                .map(|(&k, &n)| k as f64 / n as f64)
                .collect()
        })
        .collect()
}

/// Boolean observed/missing flags over a lattice; `true` means observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    shape: Shape,
    observed: Vec<bool>,
    n: usize,
}

impl ObservationMask {
    pub fn new(dims: &[usize], observed: Vec<bool>) -> Result<Self> {
        let shape = Shape::new(dims);
        if observed.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), observed.len()));
        }
        let n = observed.iter().filter(|&&b| b).count();
        Ok(ObservationMask { shape, observed, n })
    }

    pub fn all_observed(dims: &[usize]) -> Self {
        let shape = Shape::new(dims);
        let n = shape.len();
        ObservationMask {
            shape,
            observed: vec![true; n],
            n,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn n_observed(&self) -> usize {
        self.n
    }

    pub fn n_missing(&self) -> usize {
        self.observed.len() - self.n
    }

    pub fn is_observed(&self, linear: usize) -> bool {
        self.observed[linear]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.observed[i]).collect()
    }

    pub fn missing_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.observed[i]).collect()
    }

    /// The mask restricted to the leading corner `dims` (e.g. `J_y` inside `J_z`).
    pub fn restrict(&self, dims: &[usize]) -> Result<ObservationMask> {
        if dims.len() != self.shape.ndim() || dims.iter().zip(self.dims()).any(|(a, b)| a > b) {
            return Err(Error::mismatch(self.dims(), dims));
        }
        let small = Shape::new(dims);
        let mut idx = vec![0; dims.len()];
        let observed = (0..small.len())
            .map(|lin| {
                small.unravel(lin, &mut idx);
                self.observed[self.shape.ravel(&idx)]
            })
            .collect();
        ObservationMask::new(dims, observed)
    }
}

/// Copies a mask over `J_y` into the `J_y` corner of `J_z`; all other cells
/// of `J_z` are missing.
pub fn embed_mask(obs_on_y: &ObservationMask, spec: &LatticeSpec) -> Result<ObservationMask> {
    if obs_on_y.dims() != spec.y() {
        return Err(Error::mismatch(spec.y(), obs_on_y.dims()));
    }
    let values = embed_values(obs_on_y.as_slice(), spec, false);
    ObservationMask::new(spec.z(), values)
}

/// Places values over `J_y` into the `J_y` corner of a `J_z` array filled with `fill`.
pub fn embed_values<T: Copy>(on_y: &[T], spec: &LatticeSpec, fill: T) -> Vec<T> {
    let ys = spec.y_shape();
    let zs = spec.z_shape();
    let mut out = vec![fill; zs.len()];
    let mut idx = vec![0; ys.ndim()];
    for (lin, &v) in on_y.iter().enumerate() {
        ys.unravel(lin, &mut idx);
        out[zs.ravel(&idx)] = v;
    }
    out
}

/// Extracts the `J_y` corner of an array laid out over `J_z`.
pub fn restrict_values<T: Copy>(on_z: &[T], spec: &LatticeSpec) -> Vec<T> {
    let ys = spec.y_shape();
    let zs = spec.z_shape();
    let mut idx = vec![0; ys.ndim()];
    (0..ys.len())
        .map(|lin| {
            ys.unravel(lin, &mut idx);
            on_z[zs.ravel(&idx)]
        })
        .collect()
}

/// Real values over a lattice in row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    shape: Shape,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims);
        if values.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(GridField { shape, values })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let shape = Shape::new(dims);
        let values = vec![0.0; shape.len()];
        GridField { shape, values }
    }

    pub(crate) fn from_parts(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), values.len());
        GridField { shape, values }
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values at the observed cells of `mask`, in layout order.
    pub fn gather(&self, mask: &ObservationMask) -> Vec<f64> {
        self.values
            .iter()
            .zip(mask.as_slice())
            .filter_map(|(&v, &o)| o.then_some(v))
            .collect()
    }
}
