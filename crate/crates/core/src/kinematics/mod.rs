//! Kinematics of the 4-DOF parallelogram arm.
//!
//! The arm has a base yaw servo, a shoulder servo driving the upper link,
//! an elbow servo driving the forearm through a parallelogram (so the
//! elbow servo sets the forearm's angle to the horizontal directly, not
//! relative to the upper link), and a wrist roll. The gripper servo is not
//! counted as a degree of freedom. The parallelogram keeps the gripper
//! level, so the wrist offset is always horizontal.
//!
//! Arm frame: origin on the base yaw axis at ground level, `y` forward, `x`
//! to the right, `z` up, all in centimeters.

mod gripper;
mod servo;

pub use gripper::{gripper_aperture, GripperModel};
pub use servo::{
    joint_moments, quantize, static_torque_check, ArmServos, LinkMasses, ServoSpec, TorqueCheck,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DOF: usize = 4;

/// Servo travel limits, degrees.
pub const SERVO_MIN: f64 = 0.0;
pub const SERVO_MAX: f64 = 180.0;

/// Wrist roll that leaves the gripper jaws level.
pub const WRIST_LEVEL: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    BaseYaw,
    Shoulder,
    Elbow,
    WristRoll,
    Gripper,
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Joint::BaseYaw => "base_yaw",
            Joint::Shoulder => "shoulder",
            Joint::Elbow => "elbow",
            Joint::WristRoll => "wrist_roll",
            Joint::Gripper => "gripper",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("target unreachable: {0}")]
    Unreachable(String),
    #[error("{joint} servo would need {angle:.3} deg, outside [0, 180]")]
    ServoLimit { joint: Joint, angle: f64 },
    #[error("invalid arm parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGeometry {
    /// Base plate to shoulder axis.
    pub shoulder_height: f64,
    /// Arm A, shoulder to elbow.
    pub upper_len: f64,
    /// Arm B, elbow to wrist.
    pub fore_len: f64,
    /// Wrist axis to gripper tip, horizontal.
    pub wrist_offset: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            shoulder_height: 9.0,
            upper_len: 20.0,
            fore_len: 19.0,
            wrist_offset: 8.0,
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (name, v) in [
            ("shoulder_height", self.shoulder_height),
            ("upper_len", self.upper_len),
            ("fore_len", self.fore_len),
            ("wrist_offset", self.wrist_offset),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(KinematicsError::Invalid(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    /// Largest horizontal reach at shoulder height.
    pub fn max_reach(&self) -> f64 {
        self.upper_len + self.fore_len + self.wrist_offset
    }
}

/// Affine map between a servo command and the joint's world angle:
/// `world = sign * (servo - zero)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointCalibration {
    pub zero: f64,
    pub sign: f64,
}

impl Default for JointCalibration {
    fn default() -> Self {
        Self {
            zero: 90.0,
            sign: 1.0,
        }
    }
}

impl JointCalibration {
    pub fn to_world(&self, servo_deg: f64) -> f64 {
        self.sign * (servo_deg - self.zero)
    }

    pub fn to_servo(&self, world_deg: f64) -> f64 {
        self.zero + self.sign * world_deg
    }
}

/// Servo-to-world calibration. World angles: yaw is the azimuth from the
/// forward axis toward `+x`; shoulder and elbow are link angles above the
/// horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoCalibration {
    pub base_yaw: JointCalibration,
    pub shoulder: JointCalibration,
    pub elbow: JointCalibration,
}

impl ServoCalibration {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (name, c) in [
            ("base_yaw", self.base_yaw),
            ("shoulder", self.shoulder),
            ("elbow", self.elbow),
        ] {
            if c.sign != 1.0 && c.sign != -1.0 {
                return Err(KinematicsError::Invalid(format!(
                    "calibration.{name}.sign must be 1 or -1"
                )));
            }
            if !c.zero.is_finite() {
                return Err(KinematicsError::Invalid(format!(
                    "calibration.{name}.zero must be finite"
                )));
            }
        }
        Ok(())
    }
}

/// Servo commands in degrees, each within [0, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub base_yaw: f64,
    pub shoulder: f64,
    pub elbow: f64,
    pub wrist_roll: f64,
    pub gripper: f64,
}

impl JointAngles {
    /// Folded travel pose with the gripper open.
    pub const HOME: JointAngles = JointAngles {
        base_yaw: 90.0,
        shoulder: 150.0,
        elbow: 90.0,
        wrist_roll: WRIST_LEVEL,
        gripper: SERVO_MAX,
    };

    pub fn get(&self, joint: Joint) -> f64 {
        match joint {
            Joint::BaseYaw => self.base_yaw,
            Joint::Shoulder => self.shoulder,
            Joint::Elbow => self.elbow,
            Joint::WristRoll => self.wrist_roll,
            Joint::Gripper => self.gripper,
        }
    }

    pub fn get_mut(&mut self, joint: Joint) -> &mut f64 {
        match joint {
            Joint::BaseYaw => &mut self.base_yaw,
            Joint::Shoulder => &mut self.shoulder,
            Joint::Elbow => &mut self.elbow,
            Joint::WristRoll => &mut self.wrist_roll,
            Joint::Gripper => &mut self.gripper,
        }
    }

    pub const ALL: [Joint; 5] = [
        Joint::BaseYaw,
        Joint::Shoulder,
        Joint::Elbow,
        Joint::WristRoll,
        Joint::Gripper,
    ];

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for joint in Self::ALL {
            let angle = self.get(joint);
            if !(SERVO_MIN..=SERVO_MAX).contains(&angle) {
                return Err(KinematicsError::ServoLimit { joint, angle });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Gripper tip position. There is no pitch term: the parallelogram holds
/// the effector level for every pose.
pub fn forward_kinematics(g: &ArmGeometry, cal: &ServoCalibration, q: &JointAngles) -> Point3 {
    let yaw = cal.base_yaw.to_world(q.base_yaw).to_radians();
    let shoulder = cal.shoulder.to_world(q.shoulder).to_radians();
    let elbow = cal.elbow.to_world(q.elbow).to_radians();
    let r = g.upper_len * shoulder.cos() + g.fore_len * elbow.cos() + g.wrist_offset;
    let z = g.shoulder_height + g.upper_len * shoulder.sin() + g.fore_len * elbow.sin();
    Point3::new(r * yaw.sin(), r * yaw.cos(), z)
}

// Slack for targets sitting exactly on the reach boundary.
const REACH_EPS: f64 = 1e-9;

/// Closed-form inverse kinematics, elbow-up branch. The wrist is set
/// level; the gripper keeps its value from `current`.
pub fn inverse_kinematics(
    g: &ArmGeometry,
    cal: &ServoCalibration,
    target: Point3,
    current: &JointAngles,
) -> Result<JointAngles, KinematicsError> {
    if !(target.x.is_finite() && target.y.is_finite() && target.z.is_finite()) {
        return Err(KinematicsError::Unreachable("non-finite target".into()));
    }
    let (l1, l2) = (g.upper_len, g.fore_len);
    let yaw = target.x.atan2(target.y);
    let r = target.x.hypot(target.y) - g.wrist_offset;
    if r < 0.0 {
        return Err(KinematicsError::Unreachable(format!(
            "target is {:.3} cm inside the wrist offset",
            -r
        )));
    }
    let dz = target.z - g.shoulder_height;
    let dist = r.hypot(dz);
    let max = l1 + l2;
    let min = (l1 - l2).abs();
    let eps = REACH_EPS * max;
    if dist > max + eps {
        return Err(KinematicsError::Unreachable(format!(
            "wrist distance {dist:.3} cm exceeds link reach {max:.3} cm"
        )));
    }
    if dist < min - eps || dist <= eps {
        return Err(KinematicsError::Unreachable(format!(
            "wrist distance {dist:.3} cm inside inner radius {min:.3} cm"
        )));
    }
    let cos_inner = ((l1 * l1 + dist * dist - l2 * l2) / (2.0 * l1 * dist)).clamp(-1.0, 1.0);
    let shoulder = dz.atan2(r) + cos_inner.acos();
    let elbow = (dz - l1 * shoulder.sin()).atan2(r - l1 * shoulder.cos());

    let servo = |joint: Joint, c: &JointCalibration, world_rad: f64| {
        let angle = c.to_servo(world_rad.to_degrees());
        if !(SERVO_MIN - 1e-9..=SERVO_MAX + 1e-9).contains(&angle) {
            Err(KinematicsError::ServoLimit { joint, angle })
        } else {
            Ok(angle.clamp(SERVO_MIN, SERVO_MAX))
        }
    };
    Ok(JointAngles {
        base_yaw: servo(Joint::BaseYaw, &cal.base_yaw, yaw)?,
        shoulder: servo(Joint::Shoulder, &cal.shoulder, shoulder)?,
        elbow: servo(Joint::Elbow, &cal.elbow, elbow)?,
        wrist_roll: WRIST_LEVEL,
        gripper: current.gripper,
    })
}

/// Axis-aligned workspace box, arm-base origin, cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl WorkspaceBounds {
    /// Measured reach of the prototype arm.
    pub const NOMINAL: WorkspaceBounds = WorkspaceBounds {
        x: (-46.0, 46.0),
        y: (9.0, 46.0),
        z: (5.0, 32.0),
    };

    pub fn center(&self) -> Point3 {
        Point3::new(
            (self.x.0 + self.x.1) / 2.0,
            (self.y.0 + self.y.1) / 2.0,
            (self.z.0 + self.z.1) / 2.0,
        )
    }
}

impl Default for WorkspaceBounds {
    fn default() -> Self {
        Self::NOMINAL
    }
}

pub fn in_workspace(p: Point3, w: &WorkspaceBounds) -> bool {
    let within = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
    within(p.x, w.x) && within(p.y, w.y) && within(p.z, w.z)
}
