//! Workflow configuration: provider selection, model defaults and mesh
//! overrides. Loaded from JSON; every field is optional.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use emsim_core::geometry::{
    ConductorLayout, DomainBoundary, ExcitationSpec, GeometryError, MaterialSpec, DEFAULT_BOUNDARY_MARGIN_M,
    DEFAULT_CURRENT_A, DEFAULT_FREQUENCY_HZ, DEFAULT_RADIUS_M, SIGMA_CU,
};
use emsim_core::layoutlang::DEFAULT_STEP_BUDGET;
use emsim_core::mesher::MeshSizeSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genai::ProviderConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDefaults {
    pub radius_m: f64,
    pub boundary_margin_m: f64,
    pub conductivity_s_per_m: f64,
    pub frequency_hz: f64,
    pub current_a: f64,
}

impl Default for ModelDefaults {
    fn default() -> Self {
        Self {
            radius_m: DEFAULT_RADIUS_M,
            boundary_margin_m: DEFAULT_BOUNDARY_MARGIN_M,
            conductivity_s_per_m: SIGMA_CU,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            current_a: DEFAULT_CURRENT_A,
        }
    }
}

impl ModelDefaults {
    pub fn material(&self) -> Result<MaterialSpec, GeometryError> {
        MaterialSpec::new(self.conductivity_s_per_m)
    }

    pub fn excitation(&self) -> Result<ExcitationSpec, GeometryError> {
        ExcitationSpec::new(self.current_a, self.frequency_hz)
    }
}

/// Optional replacements for the mesher's default sizes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshOverrides {
    pub h_conductor_m: Option<f64>,
    pub h_far_m: Option<f64>,
    pub gradation: Option<f64>,
}

impl MeshOverrides {
    pub fn apply(&self, layout: &ConductorLayout, boundary: &DomainBoundary) -> MeshSizeSpec {
        let mut s = MeshSizeSpec::defaults_for(layout, boundary);
        if let Some(h) = self.h_conductor_m {
            s.h_conductor_m = h;
            if self.h_far_m.is_none() {
                s.h_far_m = s.h_far_m.max(h);
            }
        }
        if let Some(h) = self.h_far_m {
            s.h_far_m = h;
        }
        if let Some(g) = self.gradation {
            s.gradation = g;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkflowConfig {
    pub provider: ProviderConfig,
    pub model: ModelDefaults,
    pub mesh: MeshOverrides,
    /// Interpreter step budget for layout scripts.
    pub step_budget: u64,
    /// Use the DSL prompt with worked examples.
    pub dsl_examples: bool,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            provider: ProviderConfig::default(),
            model: ModelDefaults::default(),
            mesh: MeshOverrides::default(),
            step_budget: DEFAULT_STEP_BUDGET,
            dsl_examples: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl WorkflowConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let m = &self.model;
        if !(m.radius_m > 0.0 && m.radius_m.is_finite()) {
            return bad(format!("model.radius_m must be positive, got {}", m.radius_m));
        }
        if !(m.boundary_margin_m > 0.0 && m.boundary_margin_m.is_finite()) {
            return bad(format!("model.boundary_margin_m must be positive, got {}", m.boundary_margin_m));
        }
        if !(m.conductivity_s_per_m > 0.0 && m.conductivity_s_per_m.is_finite()) {
            return bad(format!("model.conductivity_s_per_m must be positive, got {}", m.conductivity_s_per_m));
        }
        m.excitation().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, v) in [("h_conductor_m", self.mesh.h_conductor_m), ("h_far_m", self.mesh.h_far_m)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("mesh.{name} must be positive, got {v}"));
                }
            }
        }
        if let Some(g) = self.mesh.gradation {
            if !(g >= 1.0 && g.is_finite()) {
                return bad(format!("mesh.gradation must be at least 1, got {g}"));
            }
        }
        if self.step_budget == 0 {
            return bad("step_budget must be positive".into());
        }
        if !(self.provider.timeout_s > 0.0 && self.provider.timeout_s.is_finite()) {
            return bad(format!("provider.timeout_s must be positive, got {}", self.provider.timeout_s));
        }
        Ok(())
    }
}

/// How far a run goes after the layout stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    LayoutOnly,
    WithPost,
    WithPostAndSummary,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::LayoutOnly => "layout_only",
            RunMode::WithPost => "with_post",
            RunMode::WithPostAndSummary => "with_post_and_summary",
        }
    }

    pub fn has_post(self) -> bool {
        self != RunMode::LayoutOnly
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "layout_only" => Ok(RunMode::LayoutOnly),
            "with_post" => Ok(RunMode::WithPost),
            "with_post_and_summary" => Ok(RunMode::WithPostAndSummary),
            other => Err(format!("unknown mode '{other}' (expected layout_only, with_post or with_post_and_summary)")),
        }
    }
}
