//! Pipeline configuration: stage toggles plus the refinement and smoothing
//! settings, loadable from JSON. Every field has a default, so `{}` is a
//! valid config running the full pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::RefineConfig;
use crate::smooth::SmoothConfig;

/// Which pipeline stages run. Twist requires the elbow solve; refinement may
/// run with or without the hand stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub mirror: bool,
    pub convert: bool,
    pub elbow_solve: bool,
    pub twist: bool,
    pub refine: bool,
    pub smooth: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles::all()
    }
}

impl StageToggles {
    pub fn all() -> Self {
        StageToggles {
            mirror: true,
            convert: true,
            elbow_solve: true,
            twist: true,
            refine: true,
            smooth: true,
        }
    }

    pub fn none() -> Self {
        StageToggles {
            mirror: false,
            convert: false,
            elbow_solve: false,
            twist: false,
            refine: false,
            smooth: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub stages: StageToggles,
    pub refine: RefineConfig,
    pub smooth: SmoothConfig,
    /// Path to a mean finger-pose file (JSON array of 15 `[x, y, z]`).
    /// Absent means the zero mean, i.e. identity conversion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hand_mean: Option<PathBuf>,
    /// Optional tree override replacing the sequence's own tree.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages.twist && !self.stages.elbow_solve {
            return Err(Error::InvalidConfig(
                "stage `twist` requires stage `elbow_solve`".into(),
            ));
        }
        self.refine.validate()?;
        self.smooth.validate()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_full_pipeline() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.stages, StageToggles::all());
        cfg.validate().unwrap();
    }

    #[test]
    fn twist_without_elbow_solve_rejected() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"stages": {"elbow_solve": false, "twist": true}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn partial_stage_toggles_parse() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"stages": {"smooth": false}}"#).unwrap();
        assert!(!cfg.stages.smooth);
        assert!(cfg.stages.refine);
    }

    #[test]
    fn refine_weights_parse() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"refine": {"lambda_2d": 0.5, "weights": {"l_wrist": 2.0}}}"#)
                .unwrap();
        assert_eq!(cfg.refine.lambda_2d, 0.5);
        assert_eq!(
            cfg.refine.weight(crate::kinematics::LandmarkId::LWrist),
            2.0
        );
        assert_eq!(
            cfg.refine.weight(crate::kinematics::LandmarkId::LElbow),
            1.0
        );
    }
}
