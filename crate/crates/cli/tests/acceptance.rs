//! Acceptance suite. Every test prints one `ACCEPTANCE <n> PASS|FAIL` line
//! with the observed values and the pinned tolerance, then asserts.
//!
//! Tests share a lock so the timed criteria are not measured while another
//! criterion saturates the machine.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use pspec::circulant::CirculantOperator;
use pspec::estimator::{EstimatorConfig, Filter};
use pspec::fft::FftNd;
use pspec::imputation::{stream_rng, Imputer};
use pspec::lattice::{embed_mask, LatticeSpec, ObservationMask, Shape};
use pspec::solver::{solve_observed, PcgConfig, Preconditioner, PreconditionerKind};
use pspec::spectral::{
    matern_cov, periodic_cov_from_spectrum, spectrum_from_cov, wrapped_true_spectrum, MaternParams, SpectrumGrid,
};
use pspec::study::{
    bispectrum_of, build_dense_model, make_missingness, max_bispectrum_error, metrics, run_study, true_spectrum,
    CirculantSimulator, Method, MissingSetting,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes to the stderr handle directly so the line survives test output capture.
fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "ACCEPTANCE {n} {verdict} {name}: {detail}");
}

fn exp_cov(h: &[f64]) -> f64 {
    2.0 * (-h.iter().map(|x| x * x).sum::<f64>().sqrt() / 8.0).exp()
}

fn study_row(mask: &ObservationMask, z: usize, iters: usize) -> (Vec<f64>, f64) {
    let start = Instant::now();
    let spec = LatticeSpec::with_z(&[32, 32], &[z, z]).unwrap();
    let f = wrapped_true_spectrum(exp_cov, &spec, None).unwrap();
    let model = build_dense_model(exp_cov, &f, mask, &spec).unwrap();
    let insb = run_study(&model, iters).unwrap();
    (insb, start.elapsed().as_secs_f64())
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn criterion_1_complete_grid_bias() {
    let _g = serial();
    let mask = ObservationMask::all_observed(&[32, 32]);
    let within = |v: f64, target: f64, tol: f64| (v - target).abs() <= tol;

    let (r32, t32) = study_row(&mask, 32, 6);
    let (r34, t34) = study_row(&mask, 34, 6);
    let (r38, t38) = study_row(&mask, 38, 6);

    let mut checks = Vec::new();
    checks.push(r32.iter().all(|&v| within(v, 7.990, 0.02 * 7.990)));
    for (k, p) in [(0, 5.489), (1, 0.231), (2, 0.201)] {
        checks.push(within(r34[k], p, 0.03 * p));
    }
    checks.push(within(r38[1], 0.079, 0.1 * 0.079));
    for &v in &r38[4..=6] {
        checks.push(within(v, 0.009, 0.002));
    }
    // Non-increasing from iteration 1 for tau > 1.
    let monotone = |r: &[f64]| r[1..].windows(2).all(|w| w[1] <= w[0] + 1e-3);
    checks.push(monotone(&r34) && monotone(&r38));
    let timed = t32.max(t34).max(t38) < 300.0;
    checks.push(timed);

    let pass = checks.iter().all(|&c| c);
    report(
        1,
        "complete-grid bias study",
        pass,
        &format!(
            "32/32 [{}] (7.990 ±2%); 34/32 [{}] (5.489, 0.231, 0.201 ±3%); 38/32 [{}] (it1 0.079 ±10%, it4-6 0.009 ±0.002); \
             non-increasing from it1 (slack 1e-3); slowest row {:.1}s (< 300s)",
            fmt_row(&r32),
            fmt_row(&r34),
            fmt_row(&r38),
            t32.max(t34).max(t38)
        ),
    );
    assert!(pass, "checks {checks:?}");
}

#[test]
fn criterion_2_missing_data_bias() {
    let _g = serial();
    let y = [32, 32];
    let mut rows = Vec::new();
    for seed in 0..3u64 {
        let mask = make_missingness(MissingSetting::Scattered, &y, &mut stream_rng(seed, 1));
        rows.push((format!("setting 1 draw {seed}"), study_row(&mask, 36, 6).0));
    }
    let block = make_missingness(MissingSetting::CenterBlock, &y, &mut stream_rng(0, 2));
    rows.push(("setting 2".to_string(), study_row(&block, 36, 6).0));

    let pass = rows.iter().all(|(_, r)| r[6] < 0.15 && r[6] < 0.01 * r[0]);
    let detail = rows
        .iter()
        .map(|(name, r)| format!("{name}: it0 {:.3}, it6 {:.4}", r[0], r[6]))
        .collect::<Vec<_>>()
        .join("; ");
    report(2, "missing-data bias study at tau 36/32", pass, &format!("{detail} (need it6 < 0.15 and < 1% of it0)"));
    assert!(pass);
}

/// Autocorrelation of a random nonnegative kernel on `{0..=a}²` plus a
/// nugget, as a lookup table over lags in `[-a, a]²`.
struct CompactCov {
    a: i64,
    table: Vec<f64>,
}

impl CompactCov {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let a: i64 = rng.random_range(1..=2);
        let side = (a + 1) as usize;
        let w: Vec<f64> = (0..side * side).map(|_| rng.random::<f64>()).collect();
        let nugget = 0.05 + 0.5 * rng.random::<f64>();
        let tside = (2 * a + 1) as usize;
        let mut table = vec![0.0; tside * tside];
        for h1 in -a..=a {
            for h2 in -a..=a {
                let mut s = 0.0;
                for s1 in 0..=a {
                    for s2 in 0..=a {
                        let (t1, t2) = (s1 + h1, s2 + h2);
                        if (0..=a).contains(&t1) && (0..=a).contains(&t2) {
                            s += w[(s1 * (a + 1) + s2) as usize] * w[(t1 * (a + 1) + t2) as usize];
                        }
                    }
                }
                if h1 == 0 && h2 == 0 {
                    s += nugget;
                }
                table[((h1 + a) as usize) * tside + (h2 + a) as usize] = s;
            }
        }
        CompactCov { a, table }
    }

    /// Integer bound on the Euclidean support radius.
    fn support(&self) -> usize {
        ((self.a as f64) * 2f64.sqrt()).ceil() as usize
    }

    fn eval(&self, h: &[f64]) -> f64 {
        let (h1, h2) = (h[0].round() as i64, h[1].round() as i64);
        if h1.abs() > self.a || h2.abs() > self.a {
            return 0.0;
        }
        let tside = (2 * self.a + 1) as usize;
        self.table[((h1 + self.a) as usize) * tside + (h2 + self.a) as usize]
    }
}

#[test]
fn criterion_3_compact_support_exactness() {
    let _g = serial();
    let mut rng = stream_rng(3, 0);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let cov = CompactCov::random(&mut rng);
        let h0 = cov.support();
        let z = 12 + h0 + 1;
        let spec = LatticeSpec::with_z(&[12, 12], &[z, z]).unwrap();
        let mut obs = vec![true; 144];
        let mut idx: Vec<usize> = (0..144).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..43] {
            obs[i] = false;
        }
        let mask = ObservationMask::new(&[12, 12], obs).unwrap();
        let f = wrapped_true_spectrum(|h: &[f64]| cov.eval(h), &spec, None).unwrap();
        let model = build_dense_model(|h: &[f64]| cov.eval(h), &f, &mask, &spec).unwrap();
        let s1 = model.study_matrix(&f).unwrap();
        let fk = bispectrum_of(&s1, spec.z()).unwrap();
        worst = worst.max(max_bispectrum_error(&fk, &f).unwrap());
    }
    let pass = worst < 1e-10;
    report(3, "compact-support exactness", pass, &format!("max |f1(nu,w) - f(nu,w)| = {worst:.2e} over 10 cases (< 1e-10)"));
    assert!(pass);
}

/// `R(h)` for every lag of the torus by a direct inverse DFT of `f`.
fn direct_cov(f: &[f64], dims: &[usize]) -> Vec<f64> {
    let shape = Shape::new(dims);
    let m = shape.len();
    (0..m)
        .map(|h| {
            let hi = shape.index_of(h);
            let mut s = 0.0;
            for w in 0..m {
                let wi = shape.index_of(w);
                let phase: f64 = hi.iter().zip(&wi).zip(dims).map(|((&a, &b), &n)| (a * b) as f64 / n as f64).sum();
                s += f[w] * (2.0 * PI * phase).cos();
            }
            s / m as f64
        })
        .collect()
}

/// Full `m × m` covariance of the periodic field, from lag values.
fn dense_cov(r: &[f64], dims: &[usize]) -> DMatrix<f64> {
    let shape = Shape::new(dims);
    let m = shape.len();
    let idx: Vec<Vec<usize>> = (0..m).map(|i| shape.index_of(i)).collect();
    DMatrix::from_fn(m, m, |i, j| {
        let lag: Vec<usize> = idx[i].iter().zip(&idx[j]).zip(dims).map(|((&a, &b), &n)| (a + n - b) % n).collect();
        r[shape.ravel(&lag)]
    })
}

fn random_symmetric_spectrum<R: Rng>(dims: &[usize], rng: &mut R) -> Vec<f64> {
    let shape = Shape::new(dims);
    let g: Vec<f64> = (0..shape.len()).map(|_| 0.2 + 3.0 * rng.random::<f64>()).collect();
    (0..shape.len())
        .map(|w| {
            let neg: Vec<usize> = shape.index_of(w).iter().zip(dims).map(|(&a, &n)| (n - a) % n).collect();
            0.5 * (g[w] + g[shape.ravel(&neg)])
        })
        .collect()
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn rel_err(a: &[f64], b: &DVector<f64>) -> f64 {
    let scale = b.amax().max(1e-300);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn criterion_4_dense_equivalence() {
    let _g = serial();
    let shapes: [&[usize]; 10] = [&[7], &[16], &[3, 3], &[4, 5], &[6, 6], &[8, 8], &[5, 12], &[2, 3, 4], &[4, 4, 4], &[64]];
    let mut rng = stream_rng(4, 0);
    let mut worst = [0.0f64; 4];
    let mut pairs = 0;
    for rep in 0..60 {
        let dims = shapes[rep % shapes.len()];
        let m: usize = dims.iter().product();
        let f = random_symmetric_spectrum(dims, &mut rng);
        let frac = 0.2 + 0.6 * rng.random::<f64>();
        let mut obs: Vec<bool> = (0..m).map(|_| rng.random::<f64>() > frac).collect();
        obs[0] = true;
        obs[m - 1] = false;
        let mask = ObservationMask::new(dims, obs.clone()).unwrap();
        let spectrum = SpectrumGrid::new(dims, f.clone()).unwrap();
        let op = CirculantOperator::new(&spectrum, &mask).unwrap();

        let r = dense_cov(&direct_cov(&f, dims), dims);
        let o: Vec<usize> = (0..m).filter(|&i| obs[i]).collect();
        let w: Vec<usize> = (0..m).filter(|&i| !obs[i]).collect();
        let a = select(&r, &o, &o);
        let b = select(&r, &o, &w);
        let rinv = r.clone().try_inverse().unwrap();
        let rinv_oo = select(&rinv, &o, &o);

        let x: Vec<f64> = (0..o.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let xv = DVector::from_column_slice(&x);
        worst[0] = worst[0].max(rel_err(&op.a_multiply(&x), &(&a * &xv)));
        worst[1] = worst[1].max(rel_err(&op.bt_multiply(&x), &(b.transpose() * &xv)));
        worst[2] = worst[2].max(rel_err(&op.inv_multiply_observed(&x), &(&rinv_oo * &xv)));

        let pcg = PcgConfig {
            rel_tol: 1e-13,
            max_iter: 1000,
        };
        let imp = Imputer::new(&spectrum, &mask, PreconditionerKind::InverseSpectrum, pcg).unwrap();
        let ce = imp.conditional_expectation(&x).unwrap();
        let oracle = b.transpose() * a.cholesky().unwrap().solve(&xv);
        worst[3] = worst[3].max(rel_err(&ce.missing_values, &oracle));
        pairs += 1;
    }
    let pass = worst.iter().all(|&e| e < 1e-8);
    report(
        4,
        "dense oracle equivalence",
        pass,
        &format!(
            "{pairs} pairs, max relative error a_multiply {:.1e}, bt_multiply {:.1e}, inv_multiply_observed {:.1e}, \
             conditional_expectation {:.1e} (< 1e-8)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_conditional_law() {
    let _g = serial();
    let spec = LatticeSpec::with_z(&[6, 6], &[8, 8]).unwrap();
    let f = wrapped_true_spectrum(exp_cov, &spec, None).unwrap();
    let mut rng = stream_rng(5, 0);
    let mut idx: Vec<usize> = (0..36).collect();
    idx.shuffle(&mut rng);
    let mut obs = vec![true; 36];
    for &i in &idx[..14] {
        obs[i] = false;
    }
    let mask_y = ObservationMask::new(&[6, 6], obs).unwrap();
    let mask = embed_mask(&mask_y, &spec).unwrap();
    let data: Vec<f64> = (0..mask.n_observed()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();

    let r = dense_cov(&direct_cov(f.values(), spec.z()), spec.z());
    let o = mask.observed_indices();
    let w = mask.missing_indices();
    let a = select(&r, &o, &o);
    let b = select(&r, &o, &w);
    let c = select(&r, &w, &w);
    let chol = a.cholesky().unwrap();
    let mean = b.transpose() * chol.solve(&DVector::from_column_slice(&data));
    let cov = &c - b.transpose() * chol.solve(&b);

    let pcg = PcgConfig {
        rel_tol: 1e-10,
        max_iter: 1000,
    };
    let imp = Imputer::new(&f, &mask, PreconditionerKind::InverseSpectrum, pcg).unwrap();
    let n_sims = 5000;
    let sims: Vec<Vec<f64>> = (0..n_sims)
        .into_par_iter()
        .map(|s| {
            imp.conditional_simulation(&data, &mut stream_rng(55, s as u64))
                .unwrap()
                .missing_values
        })
        .collect();
    let k = w.len();
    let n = n_sims as f64;
    let emp_mean: Vec<f64> = (0..k).map(|i| sims.iter().map(|s| s[i]).sum::<f64>() / n).collect();
    let mut worst_mean = 0.0f64;
    let mut worst_cov = 0.0f64;
    for i in 0..k {
        let se = (cov[(i, i)] / n).sqrt();
        worst_mean = worst_mean.max((emp_mean[i] - mean[i]).abs() / se);
        for j in i..k {
            let e = sims.iter().map(|s| (s[i] - emp_mean[i]) * (s[j] - emp_mean[j])).sum::<f64>() / (n - 1.0);
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / n).sqrt();
            worst_cov = worst_cov.max((e - cov[(i, j)]).abs() / se);
        }
    }
    let pass = worst_mean < 5.0 && worst_cov < 5.0;
    report(
        5,
        "conditional law",
        pass,
        &format!(
            "{n_sims} simulations, {k} missing cells: worst mean deviation {worst_mean:.2} SE, worst covariance deviation {worst_cov:.2} SE (< 5)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_rimse_ordering() {
    let _g = serial();
    let start = Instant::now();
    let y = [40, 40];
    let reps = 20;
    let deltas = [0.015, 0.025, 0.04, 0.06, 0.09];
    let params = MaternParams::new(0.5, 8.0, 2.0).unwrap();
    let cov = |h: &[f64]| matern_cov(h, &params);
    let sim = CirculantSimulator::new(cov, &y).unwrap();
    let methods = [
        ("filtered periodic", Method::Periodic { tau: 1.2, filter: Filter::Ar1 }),
        ("unfiltered periodic", Method::Periodic { tau: 1.2, filter: Filter::None }),
        ("zero infill", Method::ZeroInfill),
    ];
    let cfg = EstimatorConfig::for_simulation();

    // estimates[rep][method][delta]
    let estimates: Vec<Vec<Vec<Option<SpectrumGrid>>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(6, r as u64);
            let field = sim.sample(&mut rng);
            let mask = make_missingness(MissingSetting::Scattered, &y, &mut rng);
            let data = field.gather(&mask);
            methods
                .iter()
                .map(|(_, m)| deltas.iter().map(|&d| m.estimate(&data, &mask, d, &cfg).unwrap()).collect())
                .collect()
        })
        .collect();

    let mut best = Vec::new();
    let mut detail = Vec::new();
    for (mi, (name, method)) in methods.iter().enumerate() {
        let truth = true_spectrum(cov, method, &y).unwrap();
        let mut per_delta = Vec::new();
        let mut dropped = 0;
        for di in 0..deltas.len() {
            let ests: Vec<SpectrumGrid> = estimates.iter().filter_map(|e| e[mi][di].clone()).collect();
            dropped += reps - ests.len();
            per_delta.push(metrics(&ests, &truth).unwrap().rimse);
        }
        let (bi, b) = per_delta
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &v)| (i, v))
            .unwrap();
        detail.push(format!("{name} {b:.3} at delta {} ({dropped} unconverged runs)", deltas[bi]));
        best.push(b);
    }
    let vs_zero = best[2] / best[0];
    let vs_unfiltered = best[1] / best[0];
    let secs = start.elapsed().as_secs_f64();
    let pass = vs_zero >= 2.0 && vs_unfiltered >= 1.3 && secs < 1800.0;
    report(
        6,
        "scaled RIMSE ordering",
        pass,
        &format!(
            "RIMSE {}; zero-infill/filtered {vs_zero:.2} (>= 2), unfiltered/filtered {vs_unfiltered:.2} (>= 1.3); {secs:.0}s (< 1800s)",
            detail.join(", ")
        ),
    );
    assert!(pass);
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_7_transform_and_solver() {
    let _g = serial();
    let mut rng = stream_rng(7, 0);
    let dims = [12, 10];

    let spec = LatticeSpec::with_z(&dims, &dims).unwrap();
    let f = wrapped_true_spectrum(exp_cov, &spec, None).unwrap();
    let r = periodic_cov_from_spectrum(&f).unwrap();
    let back = periodic_cov_from_spectrum(&spectrum_from_cov(&r).unwrap()).unwrap();
    let roundtrip = max_abs_diff(r.values(), back.values()) / r.variance();

    let x: Vec<f64> = (0..120).map(|_| rng.random::<f64>() - 0.5).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let spectral: f64 = FftNd::new(&dims).forward_real(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / 120.0;
    let parseval = (energy - spectral).abs() / energy;

    let mut obs: Vec<bool> = (0..120).map(|_| rng.random::<f64>() > 0.3).collect();
    obs[0] = true;
    let mask = ObservationMask::new(&dims, obs.clone()).unwrap();
    let op = CirculantOperator::new(&f, &mask).unwrap();
    let o: Vec<usize> = (0..120).filter(|&i| obs[i]).collect();
    let rd = dense_cov(&direct_cov(f.values(), &dims), &dims);
    let a = select(&rd, &o, &o);
    let rhs: Vec<f64> = (0..o.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    let cfg = PcgConfig {
        rel_tol: 1e-12,
        max_iter: 1000,
    };
    let pre = Preconditioner::build(PreconditionerKind::InverseSpectrum, &op, &mask).unwrap();
    let (sol, _) = solve_observed(&op, &pre, &rhs, &cfg).unwrap();
    let dense = a.cholesky().unwrap().solve(&DVector::from_column_slice(&rhs));
    let pcg_err = rel_err(&sol, &dense);

    let full = ObservationMask::all_observed(&dims);
    let op_full = CirculantOperator::new(&f, &full).unwrap();
    let pre_full = Preconditioner::build(PreconditionerKind::InverseSpectrum, &op_full, &full).unwrap();
    let (_, rep) = solve_observed(&op_full, &pre_full, &x, &PcgConfig::default()).unwrap();

    let pass = roundtrip < 1e-12 && parseval < 1e-10 && pcg_err < 1e-8 && rep.converged && rep.iterations <= 2;
    report(
        7,
        "transform and solver properties",
        pass,
        &format!(
            "covariance round trip {roundtrip:.1e} (< 1e-12), Parseval {parseval:.1e} (< 1e-10), PCG vs dense {pcg_err:.1e} (< 1e-8), \
             complete-data iterations {} (<= 2)",
            rep.iterations
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_vecchia_performance() {
    let _g = serial();
    let y = [500, 300];
    let spec = LatticeSpec::new(&y, 1.2).unwrap();
    let params = MaternParams::new(0.5, 8.0, 2.0).unwrap();
    let f = wrapped_true_spectrum(|h: &[f64]| matern_cov(h, &params), &spec, None).unwrap();
    let mut rng = stream_rng(8, 0);
    let mask_y = make_missingness(MissingSetting::Scattered, &y, &mut rng);
    let mask = embed_mask(&mask_y, &spec).unwrap();
    let data: Vec<f64> = {
        let op = CirculantOperator::new(&f, &ObservationMask::all_observed(spec.z())).unwrap();
        let field = op.unconditional_sample(&mut rng);
        field.gather(&mask)
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let run = |kind: PreconditionerKind| {
        pool.install(|| {
            let start = Instant::now();
            let imp = Imputer::new(&f, &mask, kind, PcgConfig::default()).unwrap();
            let res = imp.conditional_simulation(&data, &mut stream_rng(8, 1)).unwrap();
            (start.elapsed().as_secs_f64(), res.report)
        })
    };
    let (t_v, rep_v) = run(PreconditionerKind::Vecchia { neighbors: 30 });
    let (t_f, rep_f) = run(PreconditionerKind::InverseSpectrum);
    let pass = rep_v.converged && t_v < 60.0 && rep_v.iterations < rep_f.iterations;
    report(
        8,
        "500x300 Vecchia conditional simulation",
        pass,
        &format!(
            "Vecchia {t_v:.2}s single-threaded (< 60s), {} iterations vs inverse spectrum {} iterations ({t_f:.2}s)",
            rep_v.iterations, rep_f.iterations
        ),
    );
    assert!(pass);
}

fn pspec_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pspec")).args(args).output().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_9_cli_determinism() {
    let _g = serial();
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let sim_dir = root.join("sim");
    let o = pspec_cli(&["simulate", "--dims", "24,20", "--setting", "1", "--seed", "9", "--range", "4", "-o", &s(&sim_dir)]);
    assert!(o.status.success());
    let input = sim_dir.join("sim_1.txt");

    let mut runs = Vec::new();
    for (k, threads) in ["1", "4", "1", "3"].iter().enumerate() {
        let est = root.join(format!("est{k}"));
        let o = pspec_cli(&[
            "--threads",
            threads,
            "estimate",
            "-i",
            &s(&input),
            "-o",
            &s(&est),
            "--seed",
            "17",
            "--par_spec_fun",
            "ar1",
            "--burn_iters",
            "5",
            "--max_iterations",
            "40",
        ]);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
        let sims = root.join(format!("cs{k}"));
        let o = pspec_cli(&[
            "--threads",
            threads,
            "condsim",
            "-i",
            &s(&input),
            "-s",
            &s(&est.join("spectrum.txt")),
            "-o",
            &s(&sims),
            "--L",
            "2",
            "--seed",
            "17",
            "--precond_method",
            "vecchia",
            "--neighbors",
            "10",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files = dir_bytes(&est);
        files.extend(dir_bytes(&sims));
        runs.push(files);
    }
    let n_files = runs[0].len();
    let pass = runs.iter().all(|r| *r == runs[0]) && n_files == 6;
    report(
        9,
        "CLI determinism",
        pass,
        &format!("{n_files} output files byte-identical across 4 runs with 1, 4, 1 and 3 threads"),
    );
    assert!(pass);
}
