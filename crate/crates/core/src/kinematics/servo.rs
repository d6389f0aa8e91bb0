use serde::{Deserialize, Serialize};

use super::{
    ArmGeometry, Joint, JointAngles, KinematicsError, ServoCalibration, SERVO_MAX, SERVO_MIN,
};

/// Hobby servo characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoSpec {
    /// Stall torque, kg*cm.
    pub stall_torque: f64,
    /// Band (deg) where the servo holds position with the smallest offset.
    pub preferred_min: f64,
    pub preferred_max: f64,
    /// Typical end-effector position offset, cm.
    pub position_offset: f64,
    /// Command resolution, deg.
    pub resolution: f64,
}

impl ServoSpec {
    /// MG955 metal gear servo at 4.8 V.
    pub const MG955_4V8: ServoSpec = ServoSpec::with_torque(8.5);
    /// MG955 at 6 V.
    pub const MG955_6V: ServoSpec = ServoSpec::with_torque(10.0);
    /// TowerPro SG90 micro servo at 4.8 V.
    pub const SG90_4V8: ServoSpec = ServoSpec::with_torque(2.5);

    const fn with_torque(stall_torque: f64) -> Self {
        Self {
            stall_torque,
            preferred_min: 40.0,
            preferred_max: 140.0,
            position_offset: 0.5,
            resolution: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: &str| Err(KinematicsError::Invalid(m.to_string()));
        if !(self.stall_torque > 0.0 && self.stall_torque.is_finite()) {
            return bad("stall_torque must be > 0");
        }
        if !(SERVO_MIN <= self.preferred_min
            && self.preferred_min <= self.preferred_max
            && self.preferred_max <= SERVO_MAX)
        {
            return bad("preferred range must lie within [0, 180]");
        }
        if !(self.resolution > 0.0 && self.resolution <= SERVO_MAX) {
            return bad("resolution must be in (0, 180]");
        }
        if !(self.position_offset >= 0.0) {
            return bad("position_offset must be >= 0");
        }
        Ok(())
    }
}

impl Default for ServoSpec {
    fn default() -> Self {
        Self::MG955_4V8
    }
}

/// Servo fitted at each joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmServos {
    pub base_yaw: ServoSpec,
    pub shoulder: ServoSpec,
    pub elbow: ServoSpec,
    pub wrist_roll: ServoSpec,
    pub gripper: ServoSpec,
}

impl Default for ArmServos {
    fn default() -> Self {
        Self {
            base_yaw: ServoSpec::MG955_4V8,
            shoulder: ServoSpec::MG955_4V8,
            elbow: ServoSpec::MG955_4V8,
            wrist_roll: ServoSpec::SG90_4V8,
            gripper: ServoSpec::SG90_4V8,
        }
    }
}

impl ArmServos {
    pub fn get(&self, joint: Joint) -> &ServoSpec {
        match joint {
            Joint::BaseYaw => &self.base_yaw,
            Joint::Shoulder => &self.shoulder,
            Joint::Elbow => &self.elbow,
            Joint::WristRoll => &self.wrist_roll,
            Joint::Gripper => &self.gripper,
        }
    }
}

/// Link masses in grams, each with its center of mass at mid-link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkMasses {
    pub upper_g: f64,
    pub fore_g: f64,
}

impl Default for LinkMasses {
    fn default() -> Self {
        Self {
            upper_g: 60.0,
            fore_g: 60.0,
        }
    }
}

fn round_to_step(angle: f64, step: f64) -> f64 {
    let lo = (angle / step).floor() * step;
    let hi = lo + step;
    let (d_lo, d_hi) = (angle - lo, hi - angle);
    let tie = (d_lo - d_hi).abs() <= 1e-9 * step;
    let picked = if tie {
        // Ties go toward the center of travel.
        if (lo - 90.0).abs() <= (hi - 90.0).abs() {
            lo
        } else {
            hi
        }
    } else if d_lo < d_hi {
        lo
    } else {
        hi
    };
    let mut out = picked;
    while out > SERVO_MAX + 1e-9 {
        out -= step;
    }
    while out < SERVO_MIN - 1e-9 {
        out += step;
    }
    out
}

/// Round every joint to the servo resolution. The flag reports whether any
/// of the four arm joints ends up outside the preferred band, where servos
/// hold position less accurately. The gripper is not part of the flag.
pub fn quantize(q: &JointAngles, s: &ServoSpec) -> (JointAngles, bool) {
    let mut out = *q;
    let mut degraded = false;
    for joint in JointAngles::ALL {
        let v = round_to_step(q.get(joint), s.resolution);
        *out.get_mut(joint) = v;
        if joint != Joint::Gripper && !(s.preferred_min <= v && v <= s.preferred_max) {
            degraded = true;
        }
    }
    (out, degraded)
}

/// Static gravity torque on the shoulder and elbow servos, kg*cm.
///
/// With the parallelogram the shoulder servo carries only the upper link's
/// angle and the elbow servo only the forearm's, so by virtual work each
/// servo sees the horizontal lever of its own link: the shoulder supports
/// the upper link at half length plus everything beyond the elbow at full
/// upper-link length, and the elbow supports the forearm at half length
/// plus the payload at full forearm length. The level wrist offset adds no
/// moment to either.
pub fn joint_moments(
    g: &ArmGeometry,
    cal: &ServoCalibration,
    q: &JointAngles,
    payload_g: f64,
    masses: &LinkMasses,
) -> (f64, f64) {
    let shoulder = cal.shoulder.to_world(q.shoulder).to_radians();
    let elbow = cal.elbow.to_world(q.elbow).to_radians();
    let upper_lever = g.upper_len * shoulder.cos();
    let fore_lever = g.fore_len * elbow.cos();
    let shoulder_gcm =
        masses.upper_g * upper_lever / 2.0 + (masses.fore_g + payload_g) * upper_lever;
    let elbow_gcm = masses.fore_g * fore_lever / 2.0 + payload_g * fore_lever;
    (shoulder_gcm.abs() / 1000.0, elbow_gcm.abs() / 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TorqueCheck {
    Ok,
    Exceeded {
        joint: Joint,
        /// Required torque including the safety factor, kg*cm.
        required: f64,
        available: f64,
    },
}

impl TorqueCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, TorqueCheck::Ok)
    }
}

/// Compare the static moments against stall torque, shoulder first.
pub fn static_torque_check(
    g: &ArmGeometry,
    cal: &ServoCalibration,
    q: &JointAngles,
    payload_g: f64,
    servos: &ArmServos,
    masses: &LinkMasses,
    safety_factor: f64,
) -> TorqueCheck {
    let (shoulder, elbow) = joint_moments(g, cal, q, payload_g, masses);
    for (joint, moment) in [(Joint::Shoulder, shoulder), (Joint::Elbow, elbow)] {
        let required = moment * safety_factor;
        let available = servos.get(joint).stall_torque;
        if required > available {
            return TorqueCheck::Exceeded {
                joint,
                required,
                available,
            };
        }
    }
    TorqueCheck::Ok
}
