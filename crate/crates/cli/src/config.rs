//! Experiment configuration, driver specs and provenance hashing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use roughpd::io::load_path;
use roughpd::lift::{smooth_lift, BrownianSpec};
use roughpd::oracle::OracleConfig;
use roughpd::path::DiscretePath;
use roughpd::RoughPath;

use crate::error::{CliError, CliResult};

/// Exponent used when neither a flag nor the config names one.
pub const DEFAULT_P: f64 = 2.1;

/// Optional overrides of [`OracleConfig`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOverrides {
    pub refinement_factor: Option<usize>,
    pub enumeration_cap: Option<usize>,
    pub fd_step: Option<f64>,
}

impl OracleOverrides {
    pub fn resolve(&self) -> CliResult<OracleConfig> {
        let d = OracleConfig::default();
        Ok(OracleConfig::new(
            self.refinement_factor.unwrap_or(d.refinement_factor),
            self.enumeration_cap.unwrap_or(d.enumeration_cap),
            self.fd_step.unwrap_or(d.fd_step),
        )?)
    }
}

/// Everything a command may read. Loaded from `--config`, then overridden
/// field by field by command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A path file, `brownian:seed:n[:T[:d]]` or `linear:n`.
    pub driver: Option<String>,
    /// Path file for `pvar` and `integrate`.
    pub path: Option<PathBuf>,
    pub functional: Option<String>,
    pub sigma: Option<String>,
    pub b: Option<String>,
    pub xi: Option<Vec<f64>>,
    pub p: Option<f64>,
    /// Exponents evaluated by `pvar`.
    pub exponents: Option<Vec<f64>>,
    pub interval: Option<[f64; 2]>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub study: Option<String>,
    pub seed: Option<u64>,
    pub probes: Option<usize>,
    /// Not part of the provenance hash: it does not change any result.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub oracle: Option<OracleOverrides>,
}

macro_rules! take {
    ($dst:ident, $src:ident, $($field:ident),*) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn load(file: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(file)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", file.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", file.display())))
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overlay(mut self, flags: &ExperimentConfig) -> Self {
        take!(
            self, flags, driver, path, functional, sigma, b, xi, p, exponents, interval, tol,
            max_iter, study, seed, probes, out_dir
        );
        if let Some(o) = flags.oracle {
            let mut merged = self.oracle.unwrap_or_default();
            take!(merged, o, refinement_factor, enumeration_cap, fd_step);
            self.oracle = Some(merged);
        }
        self
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(DEFAULT_P)
    }

    pub fn oracle_config(&self) -> CliResult<OracleConfig> {
        self.oracle.unwrap_or_default().resolve()
    }

    pub fn require<'a, T>(value: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("missing required setting '{name}'")))
    }

    /// SHA-256 over the command name, the resolved config and the bytes of
    /// every referenced input file.
    pub fn hash(&self, command: &str) -> CliResult<String> {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(
            serde_json::to_string(self)
                .map_err(roughpd::Error::from)?
                .as_bytes(),
        );
        for file in self.input_files() {
            h.update(b"\n");
            h.update(read_input(&file)?);
        }
        Ok(hex::encode(h.finalize()))
    }

    fn input_files(&self) -> Vec<PathBuf> {
        let mut files: Vec<PathBuf> = self.path.iter().cloned().collect();
        if let Some(spec) = &self.driver {
            if let DriverSpec::File(f) = DriverSpec::parse(spec) {
                files.push(f);
            }
        }
        files
    }
}

fn read_input(file: &Path) -> CliResult<Vec<u8>> {
    fs::read(file).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", file.display())))
}

/// Parsed form of a driver string.
#[derive(Debug, Clone, PartialEq)]
pub enum DriverSpec {
    Brownian(BrownianSpec),
    /// `X(t) = t` on `[0, 1]` with `n` intervals.
    Linear(usize),
    File(PathBuf),
}

fn field<T: std::str::FromStr>(text: &str, what: &str, spec: &str) -> CliResult<T> {
    text.parse()
        .map_err(|_| CliError::Usage(format!("invalid {what} '{text}' in driver '{spec}'")))
}

impl DriverSpec {
    /// Anything that is not `brownian:` or `linear:` is a file name.
    pub fn parse(spec: &str) -> Self {
        match Self::parse_generated(spec) {
            Some(Ok(d)) => d,
            _ => DriverSpec::File(PathBuf::from(spec)),
        }
    }

    /// Like [`DriverSpec::parse`], but malformed `brownian:`/`linear:`
    /// strings are errors.
    pub fn parse_strict(spec: &str) -> CliResult<Self> {
        Self::parse_generated(spec).unwrap_or_else(|| Ok(DriverSpec::File(PathBuf::from(spec))))
    }

    fn parse_generated(spec: &str) -> Option<CliResult<Self>> {
        let parts: Vec<&str> = spec.split(':').collect();
        match parts[0] {
            "brownian" => Some((|| {
                if !(3..=5).contains(&parts.len()) {
                    return Err(CliError::Usage(format!(
                        "driver '{spec}' should read brownian:seed:n[:T[:d]]"
                    )));
                }
                let mut b =
                    BrownianSpec::new(field(parts[1], "seed", spec)?, field(parts[2], "n", spec)?);
                if let Some(t) = parts.get(3) {
                    b = b.horizon(field(t, "horizon", spec)?);
                }
                if let Some(d) = parts.get(4) {
                    b = b.dim(field(d, "dimension", spec)?);
                }
                Ok(DriverSpec::Brownian(b))
            })()),
            "linear" => Some((|| {
                if parts.len() != 2 {
                    return Err(CliError::Usage(format!(
                        "driver '{spec}' should read linear:n"
                    )));
                }
                Ok(DriverSpec::Linear(field(parts[1], "n", spec)?))
            })()),
            _ => None,
        }
    }

    /// The rough path with exponent `p`. Path files get their smooth lift;
    /// a `.json` file holding a serialised rough path is used as is.
    pub fn build(&self, p: f64) -> CliResult<RoughPath> {
        match self {
            DriverSpec::Brownian(b) => Ok(b.p(p).build()?),
            DriverSpec::Linear(n) => {
                let x = DiscretePath::sample(*n, 1.0, 1, |t| vec![t])?;
                Ok(smooth_lift(&x, p)?)
            }
            DriverSpec::File(f) => {
                if f.extension().is_some_and(|e| e == "json") {
                    let bytes = read_input(f)?;
                    if let Ok(rp) = serde_json::from_slice::<RoughPath>(&bytes) {
                        return Ok(rp.with_p(p)?);
                    }
                }
                Ok(smooth_lift(&load_input_path(f)?, p)?)
            }
        }
    }
}

/// Loads a path file, reporting a missing file as a usage error.
pub fn load_input_path(file: &Path) -> CliResult<DiscretePath> {
    if !file.exists() {
        return Err(CliError::Usage(format!(
            "{} does not exist",
            file.display()
        )));
    }
    Ok(load_path(file)?)
}
