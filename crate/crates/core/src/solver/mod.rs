//! Preconditioned conjugate gradient for `A x = u` on the observed block.

mod vecchia;

pub use vecchia::{build_vecchia_preconditioner, VecchiaPreconditioner};

use crate::circulant::CirculantOperator;
use crate::error::{Error, Result};
use crate::lattice::ObservationMask;

pub const DEFAULT_NEIGHBORS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PcgConfig {
    fn default() -> Self {
        PcgConfig {
            rel_tol: 1e-6,
            max_iter: 1000,
        }
    }
}

impl PcgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard PCG recurrence from a zero initial guess.
///
/// Returns the last iterate with `converged = false` when `max_iter` is hit;
/// non-finite quantities or a non-positive curvature `pᵀAp` are reported as
/// numerical breakdown.
pub fn pcg_solve<A, M>(apply_a: A, apply_m: M, rhs: &[f64], cfg: &PcgConfig) -> Result<(Vec<f64>, PcgReport)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let n = rhs.len();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite right-hand side".into()));
    }
    let b_norm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            PcgReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let mut r = rhs.to_vec();
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut report = PcgReport {
        iterations: 0,
        relative_residual: 1.0,
        converged: false,
    };
    for it in 1..=cfg.max_iter {
        let ap = apply_a(&p);
        let curvature = dot(&p, &ap);
        if !curvature.is_finite() || curvature <= 0.0 {
            return Err(Error::NumericalBreakdown(format!(
                "curvature {curvature:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if !res.is_finite() {
            return Err(Error::NumericalBreakdown(format!("residual is {res} at iteration {it}")));
        }
        report.iterations = it;
        report.relative_residual = res;
        if res <= cfg.rel_tol {
            report.converged = true;
            break;
        }
        z = apply_m(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((x, report))
}

/// Which preconditioner the imputation solves use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    /// Observed block of `R⁻¹`, applied with two transforms.
    #[default]
    InverseSpectrum,
    /// Nearest-neighbor Vecchia approximation to `A⁻¹`.
    Vecchia { neighbors: usize },
    Identity,
}

/// A preconditioner bound to one operator.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    InverseSpectrum,
    Vecchia(VecchiaPreconditioner),
    Identity,
}

impl Preconditioner {
    pub fn build(kind: PreconditionerKind, op: &CirculantOperator, mask: &ObservationMask) -> Result<Self> {
        Ok(match kind {
            PreconditionerKind::InverseSpectrum => Preconditioner::InverseSpectrum,
            PreconditionerKind::Identity => Preconditioner::Identity,
            PreconditionerKind::Vecchia { neighbors } => {
                if op.n_observed() != mask.n_observed() {
                    return Err(Error::mismatch(op.n_observed(), mask.n_observed()));
                }
                let cov = op.covariance()?;
                Preconditioner::Vecchia(build_vecchia_preconditioner(&cov, mask, neighbors)?)
            }
        })
    }

    pub fn apply(&self, op: &CirculantOperator, x: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::InverseSpectrum => op.inv_multiply_observed(x),
            Preconditioner::Vecchia(v) => v.apply(x),
            Preconditioner::Identity => x.to_vec(),
        }
    }
}

/// Solves `A x = rhs` for the observed block of `op`.
pub fn solve_observed(op: &CirculantOperator, precond: &Preconditioner, rhs: &[f64], cfg: &PcgConfig) -> Result<(Vec<f64>, PcgReport)> {
    pcg_solve(|v| op.a_multiply(v), |v| precond.apply(op, v), rhs, cfg)
}
