//! Run configuration: an optional TOML file, overridden by flags.

use std::path::{Path, PathBuf};

use esdiag_core::channels::{ChannelKind, QubitChannel};
use esdiag_core::sampler::{BootstrapConfig, SamplerConfig, ShotModel};
use esdiag_core::swapnet::BsmModel;
use esdiag_core::witness::Normalization;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub curves: CurvesSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub channel: Option<String>,
    pub strength: Option<f64>,
    pub visibility: Option<f64>,
    pub shots: Option<u64>,
    pub sequences: Option<usize>,
    pub singles_shots: Option<u64>,
    pub shot_model: Option<String>,
    pub normalization: Option<String>,
    pub resamples: Option<usize>,
    pub hom_shots: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesSection {
    pub kinds: Option<Vec<String>>,
    pub grid: Option<Vec<f64>>,
    pub points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub input: Option<PathBuf>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub overlap: Option<f64>,
    pub shots: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }
}

/// Output destination shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Fully resolved settings of `simulate`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelKind,
    pub strength: f64,
    pub visibility: f64,
    pub sampler: SamplerConfig,
    pub normalization: Normalization,
    pub resamples: usize,
    pub hom_shots: u64,
    pub output: Output,
}

impl RunConfig {
    pub fn channel(&self) -> Result<QubitChannel, CliError> {
        Ok(QubitChannel::new(self.channel, self.strength)?)
    }

    pub fn bsm(&self) -> Result<BsmModel, CliError> {
        Ok(BsmModel::new(self.visibility)?)
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig { resamples: self.resamples, seed: self.sampler.seed }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(CliError::Config(format!("strength {} must lie in [0, 1]", self.strength)));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(CliError::Config(format!("visibility {} must lie in [0, 1]", self.visibility)));
        }
        if self.sampler.shots == 0 || self.sampler.sequences == 0 || self.sampler.singles_shots == 0 {
            return Err(CliError::Config("shots, sequences and singles shots must be positive".into()));
        }
        if self.hom_shots == 0 {
            return Err(CliError::Config("hom shots must be positive".into()));
        }
        Ok(())
    }
}

pub fn parse_channel(name: &str) -> Result<ChannelKind, CliError> {
    ChannelKind::from_name(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown channel '{name}' (expected identity, depolarizing, phase_damping or amplitude_damping)"
        ))
    })
}

pub fn parse_normalization(name: &str) -> Result<Normalization, CliError> {
    Normalization::from_name(name).ok_or_else(|| {
        CliError::Config(format!("unknown normalization '{name}' (expected conditioned or genuine_rate_calibrated)"))
    })
}

pub fn parse_shot_model(name: &str) -> Result<ShotModel, CliError> {
    match name {
        "averaged" => Ok(ShotModel::Averaged),
        "mixture_resolved" | "mixture" => Ok(ShotModel::MixtureResolved),
        _ => Err(CliError::Config(format!("unknown shot model '{name}' (expected averaged or mixture_resolved)"))),
    }
}

pub fn shot_model_name(model: ShotModel) -> &'static str {
    match model {
        ShotModel::Averaged => "averaged",
        ShotModel::MixtureResolved => "mixture_resolved",
    }
}

/// `points` evenly spaced values on `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = FileConfig::parse(
            "seed = 4\nformat = \"csv\"\n[simulate]\nchannel = \"phase_damping\"\nstrength = 0.5\n[curves]\ngrid = [0.0, 1.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(4));
        assert_eq!(cfg.format, Some(Format::Csv));
        assert_eq!(cfg.simulate.channel.as_deref(), Some("phase_damping"));
        assert_eq!(cfg.curves.grid, Some(vec![0.0, 1.0]));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse("[simulate]\nshotz = 3\n").is_err());
        assert!(FileConfig::parse("format = \"xml\"\n").is_err());
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(uniform_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform_grid(1), vec![0.0]);
    }
}
