//! Run configuration files.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dynamics::{FaultSpec, MotorParameters, SimOptions, Supply};
use crate::error::{Error, Result};
use crate::inductance::{MutualModel, SkewMode};

/// The built-in profile of the 40-bar reference motor.
pub const DEFAULT_PROFILE: &str = include_str!("../profiles/reference-40bar.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub skew: SkewMode,
    pub mutual: MutualModel,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            skew: SkewMode::Mutual,
            mutual: MutualModel::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub hann: bool,
    pub tolerance_bins: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            hann: false,
            tolerance_bins: 2,
        }
    }
}

/// Optional load adjustment towards a target slip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    pub target_slip: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            target_slip: None,
            tolerance: 0.003,
            max_iterations: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub timeseries_csv: bool,
    pub timeseries_binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            timeseries_csv: true,
            timeseries_binary: false,
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub motor: MotorParameters,
    pub supply: Supply,
    pub fault: FaultSpec,
    pub model: ModelOptions,
    pub sim: SimOptions,
    pub spectrum: SpectrumConfig,
    pub calibration: Calibration,
    pub output: OutputConfig,
}

impl RunConfig {
    /// The built-in reference profile.
    pub fn reference() -> Self {
        Self::from_toml(DEFAULT_PROFILE).expect("built-in profile parses")
    }

    /// Parses a complete configuration; omitted keys take the struct defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` as overrides of the built-in reference profile.
    pub fn from_toml_over_reference(text: &str) -> Result<Self> {
        let parse = |t: &str| t.parse::<toml::Table>().map_err(|e| Error::Config(e.to_string()));
        let mut base = parse(DEFAULT_PROFILE)?;
        merge(&mut base, parse(text)?);
        let cfg: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file of overrides of the reference profile.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_over_reference(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        self.fault.validate(self.motor.n)?;
        self.sim.validate()?;
        if let Some(s) = self.calibration.target_slip {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::InvalidParameter {
                    field: "calibration.target_slip".into(),
                    reason: format!("must lie in (0, 1), got {s}"),
                });
            }
        }
        if !(self.supply.frequency > 0.0) {
            return Err(Error::InvalidParameter {
                field: "supply.frequency".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
