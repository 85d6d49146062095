//! Pipeline configuration. Stored as TOML with one table per stage; every
//! key is optional and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decode::{NmsParams, Representation};
use crate::error::{Error, Result};
use crate::grasp::{GripperModel, SamplerParams, ROBUSTNESS_THRESHOLD};
use crate::mesh::STABLE_POSE_SAMPLES;
use crate::model::{DEFAULT_FAR, DEFAULT_NEAR};
use crate::render::{CameraBounds, CameraIntrinsics, NoiseParams, VISIBILITY_TOLERANCE};
use crate::sim::SimParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    /// Objects are rescaled to a width drawn uniformly from this range (m).
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            width_min: 0.06,
            width_max: 0.10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableConfig {
    pub max_poses: usize,
    pub samples: usize,
}

impl Default for StableConfig {
    fn default() -> Self {
        StableConfig {
            max_poses: 25,
            samples: STABLE_POSE_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// Robustness threshold of the binary label.
    pub delta: f64,
    /// Maximum rendered-depth mismatch of a visible contact (m).
    pub visibility_tolerance: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            delta: ROBUSTNESS_THRESHOLD,
            visibility_tolerance: VISIBILITY_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub bounds: CameraBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub images_per_pose: usize,
    pub noise: NoiseParams,
    /// Depth normalization window of the network input (m).
    pub near: f64,
    pub far: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            images_per_pose: 20,
            noise: NoiseParams::default(),
            near: DEFAULT_NEAR,
            far: DEFAULT_FAR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub gamma: f64,
    pub peak_distance: u32,
    pub max_proposals: usize,
    pub representation: Representation,
    /// Reproject with the noisy depth instead of the noise-free render.
    pub noisy_depth: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        let nms = NmsParams::default();
        DecodeConfig {
            gamma: nms.gamma,
            peak_distance: nms.peak_distance,
            max_proposals: nms.max_proposals,
            representation: Representation::Contact,
            noisy_depth: false,
        }
    }
}

impl DecodeConfig {
    pub fn nms(&self) -> NmsParams {
        NmsParams {
            gamma: self.gamma,
            peak_distance: self.peak_distance,
            max_proposals: self.max_proposals,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub trials_per_object: usize,
    /// Side lengths of the placement area centered at the world origin (m).
    pub workspace: [f64; 2],
    pub gammas: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            trials_per_object: 100,
            workspace: [0.30, 0.30],
            gammas: (1..=9).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scale: ScaleConfig,
    pub stable: StableConfig,
    pub gripper: GripperModel,
    pub sampler: SamplerParams,
    pub label: LabelConfig,
    pub camera: CameraConfig,
    pub render: RenderConfig,
    pub decode: DecodeConfig,
    pub sim: SimParams,
    pub eval: EvalConfig,
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what.to_string()))
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scale;
        check(
            s.width_min.is_finite() && s.width_min > 0.0 && s.width_min <= s.width_max && s.width_max.is_finite(),
            "scale: need 0 < width_min <= width_max",
        )?;
        check(
            self.stable.max_poses > 0 && self.stable.samples > 0,
            "stable: max_poses and samples must be positive",
        )?;
        self.gripper
            .validate()
            .map_err(|e| Error::Config(format!("gripper: {e}")))?;
        let e = &self.sampler.epsilon;
        check(self.sampler.k > 0, "sampler: k must be positive")?;
        check(
            e.sigma_contact >= 0.0 && e.mu_std >= 0.0 && e.mu_min >= 0.0 && e.mu_mean.is_finite(),
            "sampler.epsilon: standard deviations and mu_min must be non-negative",
        )?;
        check(unit(self.label.delta), "label: delta must lie in [0, 1]")?;
        check(
            self.label.visibility_tolerance >= 0.0,
            "label: visibility_tolerance must be non-negative",
        )?;
        self.camera
            .intrinsics
            .validate()
            .map_err(|e| Error::Config(format!("camera.intrinsics: {e}")))?;
        self.camera
            .bounds
            .validate()
            .map_err(|e| Error::Config(format!("camera.bounds: {e}")))?;
        self.render
            .noise
            .validate()
            .map_err(|e| Error::Config(format!("render.noise: {e}")))?;
        check(self.render.near < self.render.far, "render: near must be below far")?;
        check(unit(self.decode.gamma), "decode: gamma must lie in [0, 1]")?;
        check(self.decode.max_proposals > 0, "decode: max_proposals must be positive")?;
        let sim = &self.sim;
        check(
            sim.approach >= 0.0 && sim.step > 0.0 && sim.mu > 0.0,
            "sim: need approach >= 0, step > 0, mu > 0",
        )?;
        check(
            self.eval.workspace.iter().all(|w| w.is_finite() && *w >= 0.0),
            "eval: workspace sides must be non-negative",
        )?;
        check(!self.eval.gammas.is_empty(), "eval: gammas must not be empty")?;
        check(
            self.eval.gammas.iter().all(|g| unit(*g)),
            "eval: gammas must lie in [0, 1]",
        )?;
        Ok(())
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_gammas(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("invalid gamma list '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let out = match parts.as_slice() {
        [a, b, c] => {
            let (a, b, c) = (num(a)?, num(b)?, num(c)?);
            if c.is_nan() || c <= 0.0 || b < a {
                return Err(bad());
            }
            let n = ((b - a) / c + 1e-9).floor() as usize;
            // Round to 12 decimals so 0.1:0.9:0.1 yields 0.3, not 0.30000000000000004.
            (0..=n).map(|k| ((a + k as f64 * c) * 1e12).round() / 1e12).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad()),
    };
    if out.is_empty() || out.iter().any(|g| !unit(*g)) {
        return Err(bad());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.eval.gammas.len(), 9);
        assert_eq!(c.eval.gammas[2], 0.3);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = PipelineConfig::from_toml("seed = 9\n[decode]\ngamma = 0.6\n[gripper]\nmax_width = 0.1\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.decode.gamma, 0.6);
        assert_eq!(c.decode.peak_distance, 4);
        assert_eq!(c.gripper.max_width, 0.1);
        assert_eq!(c.gripper.friction, 0.5);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(PipelineConfig::from_toml("sed = 1"), Err(Error::Config(_))));
        assert!(PipelineConfig::from_toml("[decode]\ngama = 0.3").is_err());
        assert!(PipelineConfig::from_toml("[decode]\ngamma = 1.5").is_err());
        assert!(PipelineConfig::from_toml("[scale]\nwidth_min = 0.2\nwidth_max = 0.1").is_err());
    }

    #[test]
    fn gamma_lists() {
        let g = parse_gammas("0.1:0.9:0.1").unwrap();
        assert_eq!(g, (1..=9).map(|k| k as f64 / 10.0).collect::<Vec<_>>());
        assert_eq!(parse_gammas("0.4,0.8").unwrap(), vec![0.4, 0.8]);
        assert_eq!(parse_gammas("1.0").unwrap(), vec![1.0]);
        assert!(parse_gammas("0.9:0.1:0.1").is_err());
        assert!(parse_gammas("a").is_err());
        assert!(parse_gammas("0.5:1.5:0.5").is_err());
    }
}
