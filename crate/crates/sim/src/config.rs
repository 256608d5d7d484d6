//! Experiment configuration, read from TOML.
//!
//! Deserialization errors and semantic validation errors both carry the
//! dotted path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semap_core::octree::OctreeParams;
use semap_core::{LogOdds, SensorParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Semantic,
    Binary,
    Frontier,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Semantic => "semantic",
            Self::Binary => "binary",
            Self::Frontier => "frontier",
        }
    }
}

/// A per-class parameter: one value for every object class or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassValues {
    Uniform(f64),
    PerClass(Vec<f64>),
}

impl ClassValues {
    fn log_odds(&self, k: usize, path: &str) -> Result<LogOdds, ConfigError> {
        let values = match self {
            Self::Uniform(v) => vec![*v; k],
            Self::PerClass(v) if v.len() == k => v.clone(),
            Self::PerClass(v) => {
                return Err(ConfigError::invalid(
                    path,
                    format!(
                        "expected {k} values (one per object class), got {}",
                        v.len()
                    ),
                ))
            }
        };
        LogOdds::new(std::iter::once(0.0).chain(values))
            .map_err(|e| ConfigError::invalid(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Built-in environment name.
    pub builtin: Option<String>,
    /// CSV class grid, first row is the top of the map.
    pub file: Option<PathBuf>,
    /// Cell size for `file`, in meters.
    pub resolution: Option<f64>,
    /// Number of object classes for `file`; defaults to the largest id.
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub rays: usize,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    pub r_max: f64,
    pub phi_plus: ClassValues,
    pub psi_plus: ClassValues,
    pub phi_minus: ClassValues,
    #[serde(default)]
    pub range_sigma: f64,
    #[serde(default)]
    pub misclass_prob: f64,
    /// Row `y - 1` is the distribution of the reported label given true
    /// class `y`; overrides `misclass_prob`.
    pub confusion: Option<Vec<Vec<f64>>>,
}

fn default_fov() -> f64 {
    360.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    #[serde(default = "default_min_frontier")]
    pub min_frontier_size: usize,
}

fn default_min_frontier() -> usize {
    3
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            min_frontier_size: default_min_frontier(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OctreeSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_true")]
    pub pruning: bool,
    pub max_depth: u8,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_min_thresh")]
    pub min_thresh: f64,
    #[serde(default = "default_max_thresh")]
    pub max_thresh: f64,
    #[serde(default)]
    pub phi_plus_others: f64,
}

fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    OctreeParams::default().alpha
}
fn default_min_thresh() -> f64 {
    OctreeParams::default().min_thresh
}
fn default_max_thresh() -> f64 {
    OctreeParams::default().max_thresh
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub max_iterations: usize,
    pub strategy: StrategyName,
    pub output_dir: Option<PathBuf>,
    pub environment: EnvironmentConfig,
    pub sensor: SensorConfig,
    #[serde(default)]
    pub planner: PlannerSection,
    pub octree: Option<OctreeSection>,
    /// Fixed initial pose; sampled over free cells when absent.
    pub start: Option<StartPose>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ConfigError::invalid("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::invalid(path, e.into_inner().message().to_string())
        })
    }

    /// Reads a config file. A relative `environment.file` is resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        if let Some(file) = &config.environment.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    config.environment.file = Some(dir.join(file));
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Checks every field that deserialization alone cannot.
    pub fn validate(&self, num_classes: usize) -> Result<(), ConfigError> {
        let s = &self.sensor;
        if s.rays == 0 {
            return Err(ConfigError::invalid("sensor.rays", "must be at least 1"));
        }
        if !(s.fov_deg > 0.0 && s.fov_deg <= 360.0) {
            return Err(ConfigError::invalid(
                "sensor.fov_deg",
                "must be in (0, 360]",
            ));
        }
        if !(s.r_max > 0.0 && s.r_max.is_finite()) {
            return Err(ConfigError::invalid("sensor.r_max", "must be positive"));
        }
        if !(s.range_sigma >= 0.0 && s.range_sigma.is_finite()) {
            return Err(ConfigError::invalid(
                "sensor.range_sigma",
                "must be non-negative",
            ));
        }
        if !(0.0..1.0).contains(&s.misclass_prob) {
            return Err(ConfigError::invalid(
                "sensor.misclass_prob",
                "must be in [0, 1)",
            ));
        }
        if let Some(rows) = &s.confusion {
            if rows.len() != num_classes {
                return Err(ConfigError::invalid(
                    "sensor.confusion",
                    format!("expected {num_classes} rows, got {}", rows.len()),
                ));
            }
            for (i, row) in rows.iter().enumerate() {
                let path = format!("sensor.confusion[{i}]");
                if row.len() != num_classes {
                    return Err(ConfigError::invalid(
                        path,
                        format!("expected {num_classes} entries"),
                    ));
                }
                if row.iter().any(|p| !(0.0..=1.0).contains(p))
                    || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(ConfigError::invalid(
                        path,
                        "must be a probability distribution",
                    ));
                }
                if row[i] == 0.0 {
                    return Err(ConfigError::invalid(
                        path,
                        "true class must have non-zero probability",
                    ));
                }
            }
        }
        self.sensor_params(num_classes)?;
        if let Some(o) = &self.octree {
            Self::octree_params(o, 1.0)
                .validate()
                .map_err(|e| ConfigError::invalid("octree", e.to_string()))?;
        }
        Ok(())
    }

    pub fn sensor_params(&self, num_classes: usize) -> Result<SensorParams, ConfigError> {
        let s = &self.sensor;
        let phi_plus = s.phi_plus.log_odds(num_classes, "sensor.phi_plus")?;
        let psi_plus = s.psi_plus.log_odds(num_classes, "sensor.psi_plus")?;
        let phi_minus = s.phi_minus.log_odds(num_classes, "sensor.phi_minus")?;
        let rays = SensorParams::planar_fan(s.rays, s.fov_deg.to_radians());
        SensorParams::new(phi_plus, psi_plus, phi_minus, s.r_max, rays).map_err(|e| match e {
            semap_core::Error::InvalidParameter { name, reason } => {
                ConfigError::invalid(format!("sensor.{name}"), reason)
            }
            other => ConfigError::invalid("sensor", other.to_string()),
        })
    }

    pub fn octree_params(o: &OctreeSection, resolution: f64) -> OctreeParams {
        OctreeParams {
            resolution,
            max_depth: o.max_depth,
            alpha: o.alpha,
            min_thresh: o.min_thresh,
            max_thresh: o.max_thresh,
            phi_plus_others: o.phi_plus_others,
        }
    }
}
