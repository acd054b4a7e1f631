//! Mean removal before estimation and its reapplication to predictions.

use nalgebra::{DMatrix, DVector};

use pspec::lattice::ObservationMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanMode {
    None,
    #[default]
    Constant,
    /// Ordinary least squares on an intercept and the cell coordinates.
    Linear,
}

impl std::str::FromStr for MeanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(MeanMode::None),
            "constant" => Ok(MeanMode::Constant),
            "linear" => Ok(MeanMode::Linear),
            _ => Err(format!("mean must be none, constant or linear, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeanModel {
    Zero,
    Constant(f64),
    /// Intercept followed by one slope per axis.
    Linear(Vec<f64>),
}

impl MeanModel {
    pub fn value_at(&self, index: &[usize]) -> f64 {
        match self {
            MeanModel::Zero => 0.0,
            MeanModel::Constant(c) => *c,
            MeanModel::Linear(b) => b[0] + index.iter().zip(&b[1..]).map(|(&x, s)| x as f64 * s).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Centered {
    pub residuals: Vec<f64>,
    pub model: MeanModel,
    /// Set when a linear trend could not be fitted and a constant was used.
    pub warning: Option<String>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Removes the requested mean from the observed values of `mask`.
pub fn mean_handling(data: &[f64], mask: &ObservationMask, mode: MeanMode) -> Centered {
    let shape = mask.shape();
    let observed = mask.observed_indices();
    let (model, warning) = match mode {
        MeanMode::None => (MeanModel::Zero, None),
        MeanMode::Constant => (MeanModel::Constant(mean(data)), None),
        MeanMode::Linear => {
            let p = shape.ndim() + 1;
            let coords: Vec<Vec<usize>> = observed.iter().map(|&i| shape.index_of(i)).collect();
            let x = DMatrix::from_fn(data.len(), p, |r, c| if c == 0 { 1.0 } else { coords[r][c - 1] as f64 });
            let svd = x.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
            if data.len() < p || rank < p {
                (
                    MeanModel::Constant(mean(data)),
                    Some(format!(
                        "linear trend design has rank {rank} < {p}; using a constant mean instead"
                    )),
                )
            } else {
                let beta = svd
                    .solve(&DVector::from_column_slice(data), 1e-12 * smax)
                    .expect("svd computed with both factors");
                (MeanModel::Linear(beta.as_slice().to_vec()), None)
            }
        }
    };
    let residuals = observed
        .iter()
        .zip(data)
        .map(|(&i, &v)| v - model.value_at(&shape.index_of(i)))
        .collect();
    Centered {
        residuals,
        model,
        warning,
    }
}
