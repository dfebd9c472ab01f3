//! TOML experiment configuration. Every field is optional; command-line
//! flags override file values, and whichever fields a subcommand needs
//! must come from one of the two.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: Option<f64>,
    pub c_f: Option<f64>,
    pub r_s: Option<f64>,
    /// Path to a previously synthesized network table; alternative to
    /// giving CPE parameters directly.
    pub network: Option<PathBuf>,
    pub k_f: Option<f64>,
    pub n_half: Option<usize>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub v_high: Option<f64>,
    pub v_low: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub currents: Option<Vec<f64>>,
    pub n_cycles: Option<usize>,
    pub dt: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

/// A required setting: command-line flag first, then config file.
pub fn need<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("missing required setting `{name}`")))
}
