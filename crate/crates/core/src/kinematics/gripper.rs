use serde::{Deserialize, Serialize};

use super::{KinematicsError, SERVO_MAX, SERVO_MIN};

/// Lead-screw gripper: the servo turns a bolt, the nut rides along it and
/// pulls the two jaw links open or closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperModel {
    /// Nut travel per screw revolution, mm.
    pub screw_pitch: f64,
    /// Jaw opening at full servo travel, mm.
    pub max_aperture: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            screw_pitch: 0.8,
            max_aperture: 60.0,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.screw_pitch > 0.0 && self.screw_pitch.is_finite()) {
            return Err(KinematicsError::Invalid("screw_pitch must be > 0".into()));
        }
        if !(self.max_aperture > 0.0 && self.max_aperture.is_finite()) {
            return Err(KinematicsError::Invalid("max_aperture must be > 0".into()));
        }
        Ok(())
    }

    /// Nut displacement for a given screw angle, mm.
    pub fn nut_travel(&self, screw_angle: f64) -> f64 {
        self.screw_pitch * screw_angle / 360.0
    }

    /// Servo angle that opens the jaws to `aperture_mm`, clamped to travel.
    pub fn angle_for_aperture(&self, aperture_mm: f64) -> f64 {
        (SERVO_MAX * aperture_mm / self.max_aperture).clamp(SERVO_MIN, SERVO_MAX)
    }
}

/// Jaw opening for a screw servo angle; linear over the servo travel.
pub fn gripper_aperture(screw_angle: f64, m: &GripperModel) -> Result<f64, KinematicsError> {
    if !(SERVO_MIN..=SERVO_MAX).contains(&screw_angle) {
        return Err(KinematicsError::ServoLimit {
            joint: super::Joint::Gripper,
            angle: screw_angle,
        });
    }
    Ok((m.max_aperture * screw_angle / SERVO_MAX).clamp(0.0, m.max_aperture))
}
