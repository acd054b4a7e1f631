use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "pspec", version, about = "Spectral density estimation for gridded data with missing values")]
pub struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the spectrum by iterative imputation.
    Estimate(EstimateArgs),
    /// Conditional expectation of the missing cells under a given spectrum.
    Condexp(CondexpArgs),
    /// Conditional simulations of the missing cells under a given spectrum.
    Condsim(CondsimArgs),
    /// Dense bias study under an exponential covariance.
    Study(StudyArgs),
    /// Simulate Matérn fields with missing cells.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Data grid; `NA` marks missing cells.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Optional 0/1 grid of observed cells, for inputs without `NA`.
    #[arg(long)]
    pub observed: Option<PathBuf>,
}

/// Estimation options. Unset flags fall back to `--config`, then to defaults.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// File of `key=value` lines using the flag names below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "embed_fac")]
    pub embed_fac: Option<f64>,
    #[arg(long = "burn_iters")]
    pub burn_iters: Option<usize>,
    #[arg(long = "kern_parm")]
    pub kern_parm: Option<f64>,
    /// none or ar1
    #[arg(long = "par_spec_fun")]
    pub par_spec_fun: Option<String>,
    /// fft or vecchia
    #[arg(long = "precond_method")]
    pub precond_method: Option<String>,
    #[arg(long = "neighbors", visible_alias = "m")]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "max_iterations")]
    pub max_iterations: Option<usize>,
    /// none, constant or linear
    #[arg(long)]
    pub mean: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let numeric = [
            ("embed_fac", self.embed_fac.map(|v| v.to_string())),
            ("burn_iters", self.burn_iters.map(|v| v.to_string())),
            ("kern_parm", self.kern_parm.map(|v| v.to_string())),
            ("neighbors", self.neighbors.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("L", self.l.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("max_iterations", self.max_iterations.map(|v| v.to_string())),
        ];
        let textual = [
            ("par_spec_fun", self.par_spec_fun.clone()),
            ("precond_method", self.precond_method.clone()),
            ("mean", self.mean.clone()),
        ];
        for (key, value) in numeric.into_iter().chain(textual) {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory for spectrum.txt, condexp.txt, condsim.txt and log.tsv.
    #[arg(long, short)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CondexpArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Spectrum grid on the embedding lattice.
    #[arg(long, short)]
    pub spectrum: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CondsimArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Spectrum grid on the embedding lattice.
    #[arg(long, short)]
    pub spectrum: PathBuf,
    /// Directory for condsim_1.txt … condsim_L.txt.
    #[arg(long, short)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Missingness settings: 1 scattered, 2 center block, 3 complete.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub setting: Vec<usize>,
    /// Expansion factors, as decimals or ratios such as 34/32.
    #[arg(long, value_delimiter = ',', default_value = "32/32,34/32,36/32,38/32")]
    pub tau: Vec<String>,
    #[arg(long, default_value_t = 6)]
    pub iterations: usize,
    /// Side length of the square observation grid.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 2.0)]
    pub variance: f64,
    #[arg(long, default_value_t = 8.0)]
    pub range: f64,
    /// Seed for the random missingness of setting 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest embedding lattice the dense model may use.
    #[arg(long, default_value_t = pspec::study::DEFAULT_DENSE_CAP)]
    pub dense_cap: usize,
    /// Write the table here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    #[arg(long, default_value_t = 5.0)]
    pub range: f64,
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    /// Grid shape, e.g. 80,80.
    #[arg(long, value_delimiter = ',', default_value = "80,80")]
    pub dims: Vec<usize>,
    /// Missingness: 1 scattered, 2 center block, 3 complete.
    #[arg(long, default_value_t = 1)]
    pub setting: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for sim_1.txt … sim_count.txt.
    #[arg(long, short)]
    pub out_dir: PathBuf,
}
