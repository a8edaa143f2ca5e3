//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scan::ScanConfig;
use crate::solver::{SeedPolicy, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub scan: ScanConfig,
    pub output_dir: PathBuf,
    pub formats: BTreeSet<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::standard(),
            solver: SolverConfig::default(),
            scan: ScanConfig::default(),
            output_dir: PathBuf::from("out"),
            formats: [Format::Csv, Format::Json].into_iter().collect(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn alpha0(&self) -> f64 {
        self.scan.alpha0
    }

    pub fn trial_b(&self) -> f64 {
        self.scan.trial_b
    }

    /// Reads a config file over the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "theta_min" => self.grid.theta_min = parse(key, value)?,
            "theta_max" => self.grid.theta_max = parse(key, value)?,
            "n_nodes" | "grid_nodes" => self.grid.n_nodes = parse(key, value)?,
            "tau" => self.solver.tau = parse(key, value)?,
            "tol_residual" | "tol" => self.solver.tol_residual = parse(key, value)?,
            "tol_norm" => self.solver.tol_norm = parse(key, value)?,
            "max_iterations" => self.solver.max_iterations = parse(key, value)?,
            "warm_threshold" => self.solver.warm_threshold = parse(key, value)?,
            "seed" => {
                self.solver.seed = match value {
                    "auto" => SeedPolicy::Auto,
                    "always" => SeedPolicy::Always,
                    "never" => SeedPolicy::Never,
                    _ => return Err(Error::InvalidConfig(format!("bad seed policy `{value}`"))),
                }
            }
            "a_start" => self.scan.a_start = parse(key, value)?,
            "delta_a" => self.scan.delta_a = parse(key, value)?,
            "tol_k" => self.scan.tol_k = parse(key, value)?,
            "max_evals" => self.scan.max_evals = parse(key, value)?,
            "max_step" => self.scan.max_step = parse(key, value)?,
            "warm_start" => self.scan.warm_start = parse(key, value)?,
            "alpha0" => self.scan.alpha0 = parse(key, value)?,
            "trial_b" => self.scan.trial_b = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "formats" | "format" => {
                self.formats = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.solver.validate()?;
        self.scan.validate()?;
        if self.formats.is_empty() {
            return Err(Error::InvalidConfig("no output format selected".into()));
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}
