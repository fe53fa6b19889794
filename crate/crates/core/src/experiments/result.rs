//! Self-describing run output: the configuration echo, raw shots, averaged
//! traces, fits and derived scalars, written as one JSON document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::FitResult;
use crate::error::{io_error, Result};
use crate::signal::IQPoint;

use super::config::{IoMode, LinkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the configuration's canonical TOML.
    pub config_hash: String,
    pub seed: u64,
    pub io_mode: IoMode,
    pub config: LinkConfig,
}

impl Metadata {
    pub fn new(cfg: &LinkConfig) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            io_mode: cfg.io_mode,
            config: cfg.clone(),
        })
    }
}

/// Columns sharing one abscissa.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub x_label: String,
    pub x: Vec<f64>,
    pub series: BTreeMap<String, Vec<f64>>,
}

impl Trace {
    pub fn new(x_label: &str, x: Vec<f64>) -> Self {
        Self { x_label: x_label.into(), x, series: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Self {
        self.series.insert(name.into(), values);
        self
    }

    /// Panics if the series is missing.
    pub fn get(&self, name: &str) -> &[f64] {
        self.series.get(name).unwrap_or_else(|| panic!("trace has no series {name}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub metadata: Metadata,
    /// Per-shot demodulated points.
    pub raw_iq: BTreeMap<String, Vec<IQPoint>>,
    /// Per-point estimates before any averaging across points.
    pub raw: BTreeMap<String, Vec<f64>>,
    pub summary: BTreeMap<String, Trace>,
    pub fits: BTreeMap<String, FitResult>,
    pub scalars: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn new(experiment: &str, cfg: &LinkConfig) -> Result<Self> {
        Ok(Self {
            experiment: experiment.into(),
            metadata: Metadata::new(cfg)?,
            raw_iq: BTreeMap::new(),
            raw: BTreeMap::new(),
            summary: BTreeMap::new(),
            fits: BTreeMap::new(),
            scalars: BTreeMap::new(),
            warnings: vec![],
        })
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    /// Panics if the scalar is missing.
    pub fn scalar(&self, name: &str) -> f64 {
        *self.scalars.get(name).unwrap_or_else(|| panic!("{} has no scalar {name}", self.experiment))
    }

    /// Panics if the fit is missing.
    pub fn fit(&self, name: &str) -> &FitResult {
        self.fits.get(name).unwrap_or_else(|| panic!("{} has no fit {name}", self.experiment))
    }

    /// Panics if the trace is missing.
    pub fn trace(&self, name: &str) -> &Trace {
        self.summary.get(name).unwrap_or_else(|| panic!("{} has no trace {name}", self.experiment))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.experiment, self.metadata.io_mode)
    }

    /// Writes `<experiment>_<mode>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        let path = dir.join(format!("{}.json", self.file_stem()));
        std::fs::write(&path, self.to_json()? + "\n").map_err(io_error(&path))?;
        Ok(path)
    }
}
