use std::fmt::Write as _;
use std::path::Path;

use pspec::estimator::run_estimation;
use pspec::imputation::{stream_rng, Imputer};
use pspec::lattice::{embed_mask, restrict_values, GridField, LatticeSpec, ObservationMask};
use pspec::solver::PcgConfig;
use pspec::spectral::{matern_cov, wrapped_true_spectrum, MaternParams, SpectrumGrid};
use pspec::study::{build_dense_model_capped, make_missingness, run_study, CirculantSimulator, MissingSetting};

use crate::args::{CondexpArgs, CondsimArgs, EstimateArgs, InputArgs, SimulateArgs, StudyArgs};
use crate::config::RunConfig;
use crate::gridfile::GridFile;
use crate::trend::{mean_handling, Centered, MeanModel};
use crate::{CliError, Outcome};

fn load_input(args: &InputArgs) -> Result<GridFile, CliError> {
    let grid = GridFile::read(&args.input)?;
    let grid = match &args.observed {
        Some(path) => GridFile::with_observed(&grid, &GridFile::read(path)?)?,
        None => grid,
    };
    if grid.mask().n_observed() == 0 {
        return Err(CliError::Input("no observed cells".into()));
    }
    Ok(grid)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn center(grid: &GridFile, cfg: &RunConfig) -> (ObservationMask, Centered) {
    let mask = grid.mask();
    let centered = mean_handling(&grid.observed_values(), &mask, cfg.mean);
    if let Some(w) = &centered.warning {
        eprintln!("warning: {w}");
    }
    (mask, centered)
}

/// Observed cells keep their input values; missing cells take the field
/// value plus the mean model.
fn complete_on_y(grid: &GridFile, field_z: &GridField, spec: &LatticeSpec, mean: &MeanModel) -> Result<GridFile, CliError> {
    let on_y = restrict_values(field_z.values(), spec);
    let shape = spec.y_shape();
    let values: Vec<f64> = grid
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v.unwrap_or_else(|| on_y[i] + mean.value_at(&shape.index_of(i))))
        .collect();
    Ok(GridFile::from_values(spec.y(), &values)?)
}

pub fn estimate(args: &EstimateArgs) -> Result<Outcome, CliError> {
    let cfg = args.config.resolve().map_err(CliError::Input)?;
    let grid = load_input(&args.input)?;
    let (mask, centered) = center(&grid, &cfg);
    let spec = LatticeSpec::new(mask.dims(), cfg.embed_fac)?;
    let res = run_estimation(&centered.residuals, &mask, &spec, &cfg.estimator())?;

    create_dir(&args.out_dir)?;
    GridFile::from_values(spec.z(), res.spectrum.values())?.write(&args.out_dir.join("spectrum.txt"))?;
    complete_on_y(&grid, &res.condexp, &spec, &centered.model)?.write(&args.out_dir.join("condexp.txt"))?;
    complete_on_y(&grid, &res.condsim, &spec, &centered.model)?.write(&args.out_dir.join("condsim.txt"))?;

    let mut log = String::from("iteration\tstatistic\ttheta\n");
    for (k, stat) in res.stat_trace.iter().enumerate() {
        match res.theta_trace.get(k) {
            Some(theta) => writeln!(log, "{}\t{stat}\t{theta}", k + 1).unwrap(),
            None => writeln!(log, "{}\t{stat}\tNA", k + 1).unwrap(),
        }
    }
    write_text(&args.out_dir.join("log.tsv"), &log)?;

    if res.converged {
        eprintln!("converged after {} iterations", res.iterations);
        Ok(Outcome::Converged)
    } else {
        eprintln!("stopped at the iteration cap ({}) without converging", res.iterations);
        Ok(Outcome::MaxIterations)
    }
}

struct Prepared {
    grid: GridFile,
    spec: LatticeSpec,
    centered: Centered,
    imputer: Imputer,
}

fn prepare(input: &InputArgs, spectrum: &Path, cfg: &RunConfig) -> Result<Prepared, CliError> {
    let grid = load_input(input)?;
    let sgrid = GridFile::read(spectrum)?;
    let f = SpectrumGrid::new(sgrid.dims(), sgrid.complete_values()?)?;
    let (mask, centered) = center(&grid, cfg);
    let spec = LatticeSpec::with_z(mask.dims(), f.dims())?;
    let mask_z = embed_mask(&mask, &spec)?;
    let imputer = Imputer::new(&f, &mask_z, cfg.preconditioner(), PcgConfig::default())?;
    Ok(Prepared {
        grid,
        spec,
        centered,
        imputer,
    })
}

pub fn condexp(args: &CondexpArgs) -> Result<Outcome, CliError> {
    let cfg = args.config.resolve().map_err(CliError::Input)?;
    let p = prepare(&args.input, &args.spectrum, &cfg)?;
    let res = p.imputer.conditional_expectation(&p.centered.residuals)?;
    complete_on_y(&p.grid, &res.field, &p.spec, &p.centered.model)?.write(&args.output)?;
    Ok(Outcome::Converged)
}

pub fn condsim(args: &CondsimArgs) -> Result<Outcome, CliError> {
    let cfg = args.config.resolve().map_err(CliError::Input)?;
    let p = prepare(&args.input, &args.spectrum, &cfg)?;
    create_dir(&args.out_dir)?;
    for l in 0..cfg.l {
        let mut rng = stream_rng(cfg.seed, l as u64);
        let res = p.imputer.conditional_simulation(&p.centered.residuals, &mut rng)?;
        complete_on_y(&p.grid, &res.field, &p.spec, &p.centered.model)?
            .write(&args.out_dir.join(format!("condsim_{}.txt", l + 1)))?;
    }
    Ok(Outcome::Converged)
}

/// Parses `1.0625` or `34/32`.
pub fn parse_ratio(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Input(format!("cannot parse expansion factor {s:?}"));
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// INSB table: one row per (setting, tau), one column per iteration.
pub fn study_table(args: &StudyArgs) -> Result<String, CliError> {
    let (variance, range) = (args.variance, args.range);
    let cov = move |h: &[f64]| variance * (-h.iter().map(|x| x * x).sum::<f64>().sqrt() / range).exp();
    let y = [args.size, args.size];
    let mut out = String::from("setting\ttau");
    for k in 0..=args.iterations {
        write!(out, "\t{k}").unwrap();
    }
    out.push('\n');
    for &setting in &args.setting {
        let miss = MissingSetting::from_index(setting)?;
        let mask = make_missingness(miss, &y, &mut stream_rng(args.seed, setting as u64));
        for label in &args.tau {
            let spec = LatticeSpec::new(&y, parse_ratio(label)?)?;
            let f_true = wrapped_true_spectrum(cov, &spec, None)?;
            let model = build_dense_model_capped(cov, &f_true, &mask, &spec, args.dense_cap)?;
            let insb = run_study(&model, args.iterations)?;
            write!(out, "{setting}\t{label}").unwrap();
            for v in insb {
                write!(out, "\t{v:.6}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn study(args: &StudyArgs) -> Result<Outcome, CliError> {
    let table = study_table(args)?;
    match &args.output {
        Some(path) => write_text(path, &table)?,
        None => print!("{table}"),
    }
    Ok(Outcome::Converged)
}

pub fn simulate(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let params = MaternParams::new(args.nu, args.range, args.variance)?;
    let setting = MissingSetting::from_index(args.setting)?;
    let sim = CirculantSimulator::new(|h: &[f64]| matern_cov(h, &params), &args.dims)?;
    create_dir(&args.out_dir)?;
    for r in 0..args.count {
        let mut rng = stream_rng(args.seed, r as u64);
        let field = sim.sample(&mut rng);
        let mask = make_missingness(setting, &args.dims, &mut rng);
        GridFile::from_observed(&mask, &field.gather(&mask))?.write(&args.out_dir.join(format!("sim_{}.txt", r + 1)))?;
    }
    Ok(Outcome::Converged)
}
