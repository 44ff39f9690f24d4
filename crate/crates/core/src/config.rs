//! Engine configuration file.

use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{UnitQuat, Vec3};
use crate::perception::{LayoutMode, PerceptionConfig};
use crate::retarget::{ArmSide, RetargetMode, RigConfig};
use crate::sim::TrackingParams;
use crate::workspace::WorkspaceModel;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    #[default]
    Wall,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub retarget_mode: RetargetMode,
    pub layout_mode: LayoutMode,
    pub tick_rate_hz: u32,
    pub anchor_rate_hz: u32,
    pub scene_rate_hz: u32,
    /// A hand stream with no sample for this long is treated as missing.
    pub stale_timeout_ms: u64,
    pub clock: ClockMode,
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            retarget_mode: RetargetMode::CoarseToFine,
            layout_mode: LayoutMode::Situated,
            tick_rate_hz: 60,
            anchor_rate_hz: 30,
            scene_rate_hz: 15,
            stale_timeout_ms: 200,
            clock: ClockMode::Wall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// UDP address receiving PoseFrames.
    pub pose_listen: SocketAddr,
    /// UDP address receiving ControllerFrames.
    pub controller_listen: SocketAddr,
    /// WebSocket address of the console bridge.
    pub bridge_listen: SocketAddr,
    /// When set, CommandFrames are sent here over UDP every tick.
    pub command_target: Option<SocketAddr>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            pose_listen: "0.0.0.0:9870".parse().unwrap(),
            controller_listen: "0.0.0.0:9871".parse().unwrap(),
            bridge_listen: "127.0.0.1:9880".parse().unwrap(),
            command_target: None,
        }
    }
}

/// End condition on one arm's actual pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalPose {
    pub arm: ArmSide,
    pub position: Vec3,
    pub tolerance_m: f64,
    #[serde(default)]
    pub orientation: Option<UnitQuat>,
    #[serde(default = "default_tolerance_rad")]
    pub tolerance_rad: f64,
}

fn default_tolerance_rad() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub goals: Vec<GoalPose>,
    pub time_limit_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub version: u32,
    pub workspace: WorkspaceModel,
    pub rig: RigConfig,
    pub perception: PerceptionConfig,
    pub tracking: TrackingParams,
    pub engine: EngineSection,
    pub network: NetworkSection,
    pub session: SessionSection,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            version: CONFIG_VERSION,
            workspace: WorkspaceModel::default(),
            rig: RigConfig::default(),
            perception: PerceptionConfig::default(),
            tracking: TrackingParams::default(),
            engine: EngineSection::default(),
            network: NetworkSection::default(),
            session: SessionSection::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        if self.version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.rig.validate().map_err(invalid)?;
        self.perception.validate().map_err(invalid)?;
        self.tracking.validate().map_err(invalid)?;
        let e = &self.engine;
        for (name, rate) in [
            ("tick_rate_hz", e.tick_rate_hz),
            ("anchor_rate_hz", e.anchor_rate_hz),
            ("scene_rate_hz", e.scene_rate_hz),
        ] {
            if rate == 0 {
                return Err(invalid(format!("engine.{name} must be positive")));
            }
        }
        if e.anchor_rate_hz > e.tick_rate_hz || e.scene_rate_hz > e.tick_rate_hz {
            return Err(invalid("anchor and scene rates cannot exceed the tick rate".into()));
        }
        for g in &self.session.goals {
            if !(g.tolerance_m > 0.0 && g.tolerance_rad > 0.0) {
                return Err(invalid("session goal tolerances must be positive".into()));
            }
        }
        if self.session.time_limit_s.is_some_and(|t| !(t > 0.0)) {
            return Err(invalid("session.time_limit_s must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON form of the resolved config.
    pub fn hash(&self) -> [u8; 32] {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.engine.tick_rate_hz as f64
    }
}
