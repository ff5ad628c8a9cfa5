//! Optional TOML defaults. Flags given on the command line win.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub starts: Option<usize>,
    pub d: Option<usize>,
    /// DCA early-stop tolerance.
    pub tol: Option<f64>,
    /// Interpolation slack tolerance.
    pub interp_tol: Option<f64>,
    pub policy: Option<String>,
    pub iterations: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
