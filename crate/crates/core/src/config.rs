//! Whole-run configuration, loadable from one TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{DropPolicy, Rate};
use crate::rangeview::ProjectionConfig;
use crate::sampling::RowSelection;
use crate::segment::SegmenterConfig;
use crate::solver::SolverConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSection {
    pub width: usize,
    pub fov_up: f64,
    pub fov_down: f64,
    pub low_height: usize,
    pub high_height: usize,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        let lo = ProjectionConfig::low_res();
        Self {
            width: lo.width,
            fov_up: lo.fov_up,
            fov_down: lo.fov_down,
            low_height: lo.height,
            high_height: ProjectionConfig::high_res().height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub queue_capacity: usize,
    /// Unset: drop-oldest when a rate is given, block at max speed.
    pub drop_policy: Option<DropPolicy>,
    /// Unset: max speed.
    pub rate_hz: Option<f64>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            queue_capacity: 2,
            drop_policy: None,
            rate_hz: None,
        }
    }
}

impl PipelineSection {
    pub fn rate(&self) -> Rate {
        self.rate_hz.map_or(Rate::MaxSpeed, Rate::Hz)
    }

    pub fn effective_drop_policy(&self) -> DropPolicy {
        self.drop_policy.unwrap_or(match self.rate() {
            Rate::MaxSpeed => DropPolicy::Block,
            Rate::Hz(_) => DropPolicy::DropOldest,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub projection: ProjectionSection,
    pub selection: SelectionSection,
    pub solver: SolverConfig,
    pub segmenter: SegmenterConfig,
    pub pipeline: PipelineSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    pub fn low_config(&self) -> ProjectionConfig {
        let p = &self.projection;
        ProjectionConfig {
            height: p.low_height,
            width: p.width,
            fov_up: p.fov_up,
            fov_down: p.fov_down,
        }
    }

    pub fn high_config(&self) -> ProjectionConfig {
        self.low_config().with_height(self.projection.high_height)
    }

    pub fn selection(&self) -> Result<RowSelection, ConfigError> {
        RowSelection::uniform(self.projection.high_height, self.projection.low_height, self.selection.offset)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.low_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.high_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.selection()?;
        self.solver.validate().map_err(|e| invalid(e.to_string()))?;
        self.segmenter.validate().map_err(|e| invalid(e.to_string()))?;
        if self.pipeline.queue_capacity == 0 {
            return Err(invalid("pipeline.queue_capacity must be >= 1".into()));
        }
        if let Some(hz) = self.pipeline.rate_hz {
            if !(hz > 0.0 && hz.is_finite()) {
                return Err(invalid(format!("pipeline.rate_hz must be > 0, got {hz}")));
            }
        }
        Ok(())
    }
}
