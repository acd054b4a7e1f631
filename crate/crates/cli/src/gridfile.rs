//! Plain-text grid files.
//!
//! The first line is `d n1 … nd`. The payload follows in row-major order,
//! one line per run of the last dimension, values separated by single
//! spaces, with `NA` marking a missing cell. Values are written in the
//! shortest form that parses back to the same `f64`, switching to exponent
//! notation for very small or very large magnitudes.

use std::fmt::Write as _;
use std::path::Path;

use pspec::lattice::{GridField, ObservationMask};

pub const MISSING_TOKEN: &str = "NA";

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    dims: Vec<usize>,
    values: Vec<Option<f64>>,
}

fn write_value(out: &mut String, v: f64) {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        write!(out, "{v:e}").unwrap();
    } else {
        write!(out, "{v}").unwrap();
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> GridError {
    GridError::Parse { line, msg: msg.into() }
}

impl GridFile {
    pub fn new(dims: &[usize], values: Vec<Option<f64>>) -> Result<Self, GridError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(GridError::Shape(format!("invalid dimensions {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(GridError::Shape(format!("expected {n} values, got {}", values.len())));
        }
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(GridError::Shape(format!("non-finite value {v}")));
        }
        Ok(GridFile {
            dims: dims.to_vec(),
            values,
        })
    }

    /// A complete grid.
    pub fn from_values(dims: &[usize], values: &[f64]) -> Result<Self, GridError> {
        Self::new(dims, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn from_field(field: &GridField) -> Result<Self, GridError> {
        Self::from_values(field.dims(), field.values())
    }

    /// Observed cells of `mask` take `values` in order; the rest are missing.
    pub fn from_observed(mask: &ObservationMask, values: &[f64]) -> Result<Self, GridError> {
        if values.len() != mask.n_observed() {
            return Err(GridError::Shape(format!(
                "expected {} observed values, got {}",
                mask.n_observed(),
                values.len()
            )));
        }
        let mut out = vec![None; mask.len()];
        for (&i, &v) in mask.observed_indices().iter().zip(values) {
            out[i] = Some(v);
        }
        Self::new(mask.dims(), out)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn mask(&self) -> ObservationMask {
        ObservationMask::new(&self.dims, self.values.iter().map(Option::is_some).collect())
            .expect("grid length matches dims")
    }

    /// Values at the non-missing cells, row-major.
    pub fn observed_values(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// All values, failing on any missing cell.
    pub fn complete_values(&self) -> Result<Vec<f64>, GridError> {
        self.values
            .iter()
            .map(|v| v.ok_or_else(|| GridError::Shape("grid has missing cells where none are allowed".into())))
            .collect()
    }

    /// Combines a value grid with a separate 0/1 observation grid.
    pub fn with_observed(values: &GridFile, observed: &GridFile) -> Result<Self, GridError> {
        if values.dims != observed.dims {
            return Err(GridError::Shape(format!(
                "value grid {:?} and observation grid {:?} differ in shape",
                values.dims, observed.dims
            )));
        }
        let merged = values
            .values
            .iter()
            .zip(&observed.values)
            .map(|(v, o)| match o {
                Some(flag) if *flag != 0.0 => v.ok_or_else(|| GridError::Shape("observed cell has no value".into())).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(&values.dims, merged)
    }

    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(hline + 1, format!("bad header token {t:?}"))))
            .collect::<Result<_, _>>()?;
        let (&d, dims) = header.split_first().ok_or_else(|| parse_err(hline + 1, "empty header"))?;
        if d == 0 || dims.len() != d {
            return Err(parse_err(hline + 1, format!("header declares {d} dims but lists {}", dims.len())));
        }
        if dims.contains(&0) {
            return Err(parse_err(hline + 1, "zero-length dimension"));
        }
        let n: usize = dims.iter().product();
        let mut values = Vec::with_capacity(n);
        for (i, line) in lines {
            for tok in line.split_whitespace() {
                if tok == MISSING_TOKEN {
                    values.push(None);
                    continue;
                }
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("cannot parse {tok:?} as a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(i + 1, format!("non-finite value {tok:?}")));
                }
                values.push(Some(v));
            }
        }
        if values.len() != n {
            return Err(GridError::Shape(format!("header declares {n} cells, payload has {}", values.len())));
        }
        Ok(GridFile {
            dims: dims.to_vec(),
            values,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write!(out, "{}", self.dims.len()).unwrap();
        for n in &self.dims {
            write!(out, " {n}").unwrap();
        }
        out.push('\n');
        let run = *self.dims.last().unwrap();
        for row in self.values.chunks(run) {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                match v {
                    Some(v) => write_value(&mut out, *v),
                    None => out.push_str(MISSING_TOKEN),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), GridError> {
        std::fs::write(path, self.to_text()).map_err(|source| GridError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
