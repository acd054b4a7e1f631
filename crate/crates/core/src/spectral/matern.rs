//! Matérn covariance and the special functions it needs.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    pub nu: f64,
    pub range: f64,
    pub variance: f64,
}

impl MaternParams {
    pub fn new(nu: f64, range: f64, variance: f64) -> Result<Self> {
        for (name, v) in [("nu", nu), ("range", range), ("variance", variance)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("Matérn {name} must be positive, got {v}")));
            }
        }
        Ok(MaternParams {
            nu,
            range,
            variance,
        })
    }
}

/// Matérn covariance at lag vector `h`.
pub fn matern_cov(h: &[f64], p: &MaternParams) -> f64 {
    let r = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    matern_cov_dist(r, p)
}

/// Matérn covariance at Euclidean distance `r`.
pub fn matern_cov_dist(r: f64, p: &MaternParams) -> f64 {
    let nu = p.nu;
    let scaled = r / p.range;
    if scaled == 0.0 {
        return p.variance;
    }
    // half-integer smoothness has closed forms
    if nu == 0.5 {
        return p.variance * (-scaled).exp();
    }
    if nu == 1.5 {
        let x = 3f64.sqrt() * scaled;
        return p.variance * (1.0 + x) * (-x).exp();
    }
    if nu == 2.5 {
        let x = 5f64.sqrt() * scaled;
        return p.variance * (1.0 + x + x * x / 3.0) * (-x).exp();
    }
    let x = (2.0 * nu).sqrt() * scaled;
    if x < 1e-12 {
        return p.variance;
    }
    let log_pref = (1.0 - nu) * 2f64.ln() - ln_gamma(nu) + nu * x.ln();
    p.variance * (log_pref + bessel_k(nu, x).ln()).exp()
}

/// Modified Bessel function of the second kind, `K_ν(x)` for `x > 0`.
///
/// Trapezoid rule on `∫_0^∞ exp(-x cosh t) cosh(ν t) dt`; the integrand is
/// analytic in a strip around the real axis so the rule converges
/// geometrically in the step size.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k requires x > 0");
    let nu = nu.abs();
    let h = 0.05;
    // Factor out exp(-x) so moderate-to-large x stays representable.
    let term = |t: f64| (-x * (t.cosh() - 1.0) + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
    let mut sum = 0.5 * term(0.0);
    let mut prev = f64::INFINITY;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let v = term(t);
        sum += v;
        if v < prev && v < 1e-18 * sum {
            break;
        }
        prev = v;
        k += 1;
        if k > 200_000 {
            break;
        }
    }
    sum * h * (-x).exp()
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}
