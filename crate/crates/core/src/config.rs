//! Experiment configuration: one JSON document, unknown keys rejected, with
//! a canonical hash for output provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fe::{BeamConfig, CrackSpec, ModelKind};
use crate::hbm::{AftConfig, NewtonOptions};
use crate::identify::{GaConfig, DEFAULT_DEPTHS};
use crate::rom::SubstructureSplit;
use crate::sdof::SdofParams;
use crate::timedomain::IntegratorConfig;

/// Environment variable naming the substructure cache directory.
pub const CACHE_DIR_ENV: &str = "HOTR_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl SweepPlan {
    pub fn freqs_hz(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_hz];
        }
        let step = (self.stop_hz - self.start_hz) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.start_hz + step * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyPlan {
    /// Single analysis frequency, Hz.
    pub freq_hz: f64,
    pub sweep: SweepPlan,
}

impl Default for FrequencyPlan {
    fn default() -> Self {
        FrequencyPlan {
            freq_hz: 128.0,
            sweep: SweepPlan {
                start_hz: 50.0,
                stop_hz: 650.0,
                points: 241,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RomConfig {
    pub kind: ModelKind,
    pub modes: usize,
    pub split: SubstructureSplit,
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            kind: ModelKind::Rb,
            modes: 6,
            split: SubstructureSplit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentificationConfig {
    /// Searched crack depths, percent of the beam height.
    pub depths: Vec<u32>,
    /// Measurement noise, percent RMS.
    pub noise_percent: f64,
    pub replicates: usize,
    /// Steady periods recorded for a synthetic measurement.
    pub record_periods: usize,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        IdentificationConfig {
            depths: DEFAULT_DEPTHS.to_vec(),
            noise_percent: 1.0,
            replicates: 50,
            record_periods: crate::identify::MEASUREMENT_PERIODS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub beam: BeamConfig,
    /// `None` analyses the healthy beam.
    pub crack: Option<CrackSpec>,
    pub frequency: FrequencyPlan,
    pub aft: AftConfig,
    pub newton: NewtonOptions,
    pub integrator: IntegratorConfig,
    pub rom: RomConfig,
    pub ga: GaConfig,
    pub identification: IdentificationConfig,
    pub sdof_healthy: SdofParams,
    pub sdof_cracked: SdofParams,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            beam: BeamConfig::default(),
            crack: Some(CrackSpec::new(90, 10)),
            frequency: FrequencyPlan::default(),
            aft: AftConfig::default(),
            newton: NewtonOptions::default(),
            integrator: IntegratorConfig::default(),
            rom: RomConfig::default(),
            ga: GaConfig::default(),
            identification: IdentificationConfig::default(),
            sdof_healthy: SdofParams::healthy(),
            sdof_cracked: SdofParams::cracked(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(message) => Error::Config {
            path: path.to_string(),
            message,
        },
        other => other,
    }
}

impl ExperimentConfig {
    /// Parse JSON; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.beam.validate().map_err(|e| at("beam", e))?;
        if let Some(c) = &self.crack {
            if c.location_index == 0 || c.location_index >= self.beam.nx {
                return Err(Error::Config {
                    path: "crack.location_index".into(),
                    message: format!("must lie in 1..{}", self.beam.nx),
                });
            }
            c.depth_elems(self.beam.ny)
                .map_err(|e| at("crack.depth_percent", e))?;
        }
        if !(self.frequency.freq_hz > 0.0) {
            return Err(Error::Config {
                path: "frequency.freq_hz".into(),
                message: "must be positive".into(),
            });
        }
        let s = &self.frequency.sweep;
        if !(s.start_hz > 0.0) || s.points == 0 || (s.points > 1 && !(s.stop_hz > s.start_hz)) {
            return Err(Error::Config {
                path: "frequency.sweep".into(),
                message: "needs 0 < start_hz < stop_hz and at least one point".into(),
            });
        }
        self.aft.validate().map_err(|e| at("aft", e))?;
        if self.newton.max_iterations == 0 || !(self.newton.tolerance > 0.0) {
            return Err(Error::Config {
                path: "newton".into(),
                message: "needs a positive iteration cap and tolerance".into(),
            });
        }
        self.integrator
            .validate()
            .map_err(|e| at("integrator", e))?;
        self.rom
            .split
            .validate(self.beam.nx, self.beam.ny)
            .map_err(|e| at("rom.split", e))?;
        self.ga.validate().map_err(|e| at("ga", e))?;
        crate::identify::ParameterSpace::new(
            self.rom.split.crack_lines().collect(),
            self.identification.depths.clone(),
        )
        .map_err(|e| at("identification.depths", e))?;
        if !(self.identification.noise_percent >= 0.0) {
            return Err(Error::Config {
                path: "identification.noise_percent".into(),
                message: "must be non-negative".into(),
            });
        }
        if self.identification.replicates == 0 || self.identification.record_periods == 0 {
            return Err(Error::Config {
                path: "identification".into(),
                message: "replicates and record_periods must be positive".into(),
            });
        }
        self.sdof_healthy
            .validate()
            .map_err(|e| at("sdof_healthy", e))?;
        self.sdof_cracked
            .validate()
            .map_err(|e| at("sdof_cracked", e))?;
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON, hex. The output directory is left out
    /// so that identical analyses share a hash.
    pub fn hash(&self) -> String {
        let analysis = ExperimentConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(analysis.resolved_json().as_bytes()))
    }

    /// Cache directory from the environment, if set.
    pub fn cache_dir() -> Option<PathBuf> {
        std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    }
}
