//! Scenario configuration, loaded from TOML.
//!
//! Every section and key is optional and falls back to the defaults in
//! `scenarios/default.toml`. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::PidGains;
use crate::geometry::CameraModel;
use crate::kinematics::{
    ArmGeometry, ArmServos, GripperModel, Joint, LinkMasses, ServoCalibration, WorkspaceBounds,
};
use crate::mission::{MissionConfig, Planner};
use crate::sim::{
    ActuatorModel, DetectorOracle, ObjectStatus, Pose, RobotModel, WorldObject, WorldState,
};

/// A configuration problem, tagged with the dotted path of the field at
/// fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Camera mounting, in degrees for hand editing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub half_view_deg: f64,
    pub tilt_deg: f64,
    pub mount_height: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub arm_base_offset: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            half_view_deg: 22.5,
            tilt_deg: 48.0,
            mount_height: 30.0,
            image_width: 640,
            image_height: 480,
            arm_base_offset: 5.0,
        }
    }
}

impl CameraConfig {
    pub fn model(&self) -> Result<CameraModel, ConfigError> {
        CameraModel::new(
            self.half_view_deg.to_radians(),
            self.tilt_deg.to_radians(),
            self.mount_height,
            self.image_width,
            self.image_height,
            self.arm_base_offset,
        )
        .map_err(|e| ConfigError::new("camera", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    pub geometry: ArmGeometry,
    pub calibration: ServoCalibration,
    pub servos: ArmServos,
    pub link_masses: LinkMasses,
    pub gripper: GripperModel,
    pub workspace: WorkspaceBounds,
    /// Multiplier on static moments before comparing with stall torque.
    pub safety_factor: f64,
}

/// Robot pose at the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    /// Counter-clockwise from the world `+x` axis.
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub class: String,
    /// World position, cm.
    pub x: f64,
    pub y: f64,
    pub diameter_mm: f64,
    pub mass_g: f64,
}

/// Loopback transport between planner and actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Largest chunk the byte pipe delivers at once; 0 sends whole lines.
    pub max_chunk: usize,
    /// Probability of one flipped bit per transmission.
    pub corruption_rate: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            max_chunk: 8,
            corruption_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Simulated seconds before the run is cut off.
    pub time_budget: f64,
    pub robot: StartPose,
    pub camera: CameraConfig,
    pub arm: ArmConfig,
    pub controller: PidGains,
    pub mission: MissionConfig,
    pub actuator: ActuatorModel,
    pub detector: DetectorOracle,
    pub link: LinkConfig,
    pub objects: Vec<ObjectConfig>,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            geometry: ArmGeometry::default(),
            calibration: ServoCalibration::default(),
            servos: ArmServos::default(),
            link_masses: LinkMasses::default(),
            gripper: GripperModel::default(),
            workspace: WorkspaceBounds::NOMINAL,
            safety_factor: 1.0,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            time_budget: 120.0,
            robot: StartPose::default(),
            camera: CameraConfig::default(),
            arm: ArmConfig::default(),
            controller: PidGains::default(),
            mission: MissionConfig::default(),
            actuator: ActuatorModel::default(),
            detector: DetectorOracle::default(),
            link: LinkConfig::default(),
            objects: vec![ObjectConfig {
                class: "bottle".into(),
                x: 60.0,
                y: 20.0,
                diameter_mm: 30.0,
                mass_g: 150.0,
            }],
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be > 0, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be finite"))
    }
}

fn servo_path(j: Joint) -> String {
    format!("arm.servos.{j}")
}

/// Best-effort dotted path for a TOML error: the enclosing table header
/// plus the key on the offending line, or the key named in the message.
fn parse_error_field(text: &str, span: Option<std::ops::Range<usize>>, message: &str) -> String {
    let named = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("field"));
    let Some(span) = span else {
        return named.unwrap_or("scenario").to_string();
    };
    let before = &text[..span.start.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let section = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let section = match line.trim().starts_with('[') {
        true => Some(
            line.trim()
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string(),
        ),
        false => section,
    };
    let key = named.map(str::to_string).or_else(|| {
        line.split_once('=')
            .map(|(k, _)| k.trim().to_string())
            .filter(|k| !k.is_empty())
    });
    match (section, key) {
        (Some(s), Some(k)) => format!("{s}.{k}"),
        (Some(s), None) => s,
        (None, Some(k)) => k,
        (None, None) => "scenario".into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = parse_error_field(text, e.span(), e.message());
            ConfigError::new(field, e.to_string().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("scenario", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("time_budget", self.time_budget)?;
        finite("robot.x", self.robot.x)?;
        finite("robot.y", self.robot.y)?;
        finite("robot.heading_deg", self.robot.heading_deg)?;

        let c = &self.camera;
        positive("camera.half_view_deg", c.half_view_deg)?;
        finite("camera.tilt_deg", c.tilt_deg)?;
        positive("camera.mount_height", c.mount_height)?;
        if c.image_width == 0 {
            return Err(ConfigError::new("camera.image_width", "must be > 0"));
        }
        if c.image_height == 0 {
            return Err(ConfigError::new("camera.image_height", "must be > 0"));
        }
        finite("camera.arm_base_offset", c.arm_base_offset)?;
        c.model()?;

        let a = &self.arm;
        a.geometry
            .validate()
            .map_err(|e| ConfigError::new("arm.geometry", e))?;
        a.calibration
            .validate()
            .map_err(|e| ConfigError::new("arm.calibration", e))?;
        for j in [
            Joint::BaseYaw,
            Joint::Shoulder,
            Joint::Elbow,
            Joint::WristRoll,
            Joint::Gripper,
        ] {
            a.servos
                .get(j)
                .validate()
                .map_err(|e| ConfigError::new(servo_path(j), e))?;
        }
        if !(a.link_masses.upper_g >= 0.0 && a.link_masses.fore_g >= 0.0) {
            return Err(ConfigError::new("arm.link_masses", "masses must be >= 0"));
        }
        a.gripper
            .validate()
            .map_err(|e| ConfigError::new("arm.gripper", e))?;
        for (name, (lo, hi)) in [
            ("x", a.workspace.x),
            ("y", a.workspace.y),
            ("z", a.workspace.z),
        ] {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(ConfigError::new(
                    format!("arm.workspace.{name}"),
                    "bounds must be finite with min <= max",
                ));
            }
        }
        positive("arm.safety_factor", a.safety_factor)?;

        self.controller
            .validate()
            .map_err(|e| ConfigError::new("controller", e))?;
        self.mission
            .validate()
            .map_err(|e| ConfigError::new("mission", e.0))?;
        self.actuator
            .validate()
            .map_err(|m| ConfigError::new("actuator", m))?;
        self.detector
            .validate()
            .map_err(|m| ConfigError::new("detector", m))?;
        if !(0.0..=1.0).contains(&self.link.corruption_rate) {
            return Err(ConfigError::new(
                "link.corruption_rate",
                "must lie in [0, 1]",
            ));
        }

        for (i, o) in self.objects.iter().enumerate() {
            let at = |k: &str| format!("objects[{i}].{k}");
            if o.class.is_empty() {
                return Err(ConfigError::new(at("class"), "must not be empty"));
            }
            finite(&at("x"), o.x)?;
            finite(&at("y"), o.y)?;
            positive(&at("diameter_mm"), o.diameter_mm)?;
            if !(o.mass_g >= 0.0 && o.mass_g.is_finite()) {
                return Err(ConfigError::new(at("mass_g"), "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn camera_model(&self) -> CameraModel {
        self.camera.model().expect("validated camera")
    }

    pub fn planner(&self) -> Planner {
        Planner {
            mission: self.mission.clone(),
            gains: self.controller,
            camera: self.camera_model(),
            workspace: self.arm.workspace,
        }
    }

    pub fn robot_model(&self) -> RobotModel {
        RobotModel {
            actuator: self.actuator,
            geometry: self.arm.geometry,
            calibration: self.arm.calibration,
            servos: self.arm.servos,
            masses: self.arm.link_masses,
            gripper: self.arm.gripper,
            safety_factor: self.arm.safety_factor,
            arm_base_offset: self.camera.arm_base_offset,
        }
    }

    pub fn initial_world(&self) -> WorldState {
        let objects = self
            .objects
            .iter()
            .map(|o| WorldObject {
                class: o.class.clone(),
                x: o.x,
                y: o.y,
                diameter_mm: o.diameter_mm,
                mass_g: o.mass_g,
                status: ObjectStatus::Ground,
            })
            .collect();
        let pose = Pose {
            x: self.robot.x,
            y: self.robot.y,
            heading: self.robot.heading_deg.to_radians(),
        };
        WorldState::new(pose, objects, self.mission.bin_pose)
    }
}
