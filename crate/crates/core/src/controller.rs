//! Discrete PID on pixel alignment error and the mapping from controller
//! output to base motion commands.
//!
//! Each image axis gets its own scalar PID. The horizontal axis turns the
//! base; the vertical axis drives it forward while the object sits on the
//! far side of the optical axis (positive `dy`, see [`crate::geometry`]).
//! The base is never commanded backward during alignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Controller output that maps to a full-magnitude command.
pub const U_FULL_SCALE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("invalid gains: {0}")]
    InvalidGains(&'static str),
    #[error("motion magnitude {0} outside (0, 1]")]
    InvalidMagnitude(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup clamp on the integral, pixel-seconds.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.004,
            ki: 0.0,
            kd: 0.001,
            integral_limit: 100.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !(nonneg(self.kp) && nonneg(self.ki) && nonneg(self.kd)) {
            return Err(ControllerError::InvalidGains(
                "gains must be finite and >= 0",
            ));
        }
        if !(self.integral_limit > 0.0) {
            return Err(ControllerError::InvalidGains("integral_limit must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One PID update. Returns the control output and the next state.
///
/// The derivative term is zero on the first step after construction or
/// [`reset`].
pub fn pid_step(
    gains: &PidGains,
    state: PidState,
    error: f64,
    dt: f64,
) -> Result<(f64, PidState), ControllerError> {
    if !(dt > 0.0) {
        return Err(ControllerError::NonPositiveDt(dt));
    }
    let limit = gains.integral_limit;
    let integral = (state.integral + error * dt).clamp(-limit, limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    let control = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    Ok((
        control,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    ))
}

pub fn reset(_state: PidState) -> PidState {
    PidState::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionKind {
    Forward,
    Backward,
    StrafeLeft,
    StrafeRight,
    RotateCw,
    RotateCcw,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionCommand {
    kind: MotionKind,
    magnitude: f64,
}

impl MotionCommand {
    pub const STOP: MotionCommand = MotionCommand {
        kind: MotionKind::Stop,
        magnitude: 0.0,
    };

    pub fn new(kind: MotionKind, magnitude: f64) -> Result<Self, ControllerError> {
        match kind {
            MotionKind::Stop if magnitude == 0.0 => Ok(Self::STOP),
            MotionKind::Stop => Err(ControllerError::InvalidMagnitude(magnitude)),
            _ if magnitude > 0.0 && magnitude <= 1.0 => Ok(Self { kind, magnitude }),
            _ => Err(ControllerError::InvalidMagnitude(magnitude)),
        }
    }

    pub fn kind(&self) -> MotionKind {
        self.kind
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

/// True when no base motion is needed: the horizontal error is inside the
/// deadband and the object is not beyond the deadband on the far side.
pub fn is_aligned(deadband: f64, ex: f64, ey: f64) -> bool {
    ex.abs() <= deadband && ey <= deadband
}

fn magnitude_of(u: f64) -> f64 {
    (u.abs() / U_FULL_SCALE).min(1.0)
}

/// Map the two PID outputs to base commands.
///
/// - `|ex| > deadband`: rotate by the sign of `ux` (positive turns
///   clockwise, toward an object right of center).
/// - `ey > deadband` (object farther than the axis intercept) and `uy > 0`:
///   drive forward.
/// - Returns `[Stop]` whenever neither axis produces motion.
pub fn align_command(ux: f64, uy: f64, deadband: f64, ex: f64, ey: f64) -> Vec<MotionCommand> {
    let mut out = Vec::with_capacity(2);
    if ex.abs() > deadband && ux != 0.0 && ux.is_finite() {
        let kind = if ux > 0.0 {
            MotionKind::RotateCw
        } else {
            MotionKind::RotateCcw
        };
        out.push(MotionCommand {
            kind,
            magnitude: magnitude_of(ux),
        });
    }
    if ey > deadband && uy > 0.0 && uy.is_finite() {
        out.push(MotionCommand {
            kind: MotionKind::Forward,
            magnitude: magnitude_of(uy),
        });
    }
    if out.is_empty() {
        out.push(MotionCommand::STOP);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains {
            kp,
            ki,
            kd,
            integral_limit: 1e9,
        }
    }

    #[test]
    fn zero_error_zero_output() {
        let (u, _) = pid_step(&PidGains::default(), PidState::default(), 0.0, 0.05).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn pure_proportional() {
        let (u, _) = pid_step(&gains(1.0, 0.0, 0.0), PidState::default(), 10.0, 0.05).unwrap();
        assert_eq!(u, 10.0);
    }

    #[test]
    fn matches_scalar_recurrence() {
        // Hand-rolled recurrence, term by term.
        let (kp, ki, kd, dt) = (0.5, 0.1, 0.05, 0.05);
        let errors = [10.0, 8.0, 5.0];
        let mut integral = 0.0;
        let mut prev: Option<f64> = None;
        let mut expected = Vec::new();
        for e in errors {
            integral += e * dt;
            let d = prev.map_or(0.0, |p| (e - p) / dt);
            expected.push(kp * e + ki * integral + kd * d);
            prev = Some(e);
        }

        let g = gains(kp, ki, kd);
        let mut state = PidState::default();
        for (e, want) in errors.iter().zip(expected) {
            let (u, next) = pid_step(&g, state, *e, dt).unwrap();
            assert_eq!(u, want);
            state = next;
        }
        // 5.05, 2.09, -0.385 up to rounding
        assert!((state.integral - 1.15).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_dt() {
        let g = PidGains::default();
        assert!(pid_step(&g, PidState::default(), 1.0, 0.0).is_err());
        assert!(pid_step(&g, PidState::default(), 1.0, -0.1).is_err());
        assert!(pid_step(&g, PidState::default(), 1.0, f64::NAN).is_err());
    }

    #[test]
    fn integral_is_clamped() {
        let g = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
            integral_limit: 2.0,
        };
        let mut s = PidState::default();
        for _ in 0..100 {
            s = pid_step(&g, s, 50.0, 0.05).unwrap().1;
            assert!(s.integral.abs() <= 2.0);
        }
        assert_eq!(s.integral, 2.0);
    }

    #[test]
    fn reset_zeroes_and_is_idempotent() {
        let g = gains(1.0, 1.0, 1.0);
        let (_, s) = pid_step(&g, PidState::default(), 7.0, 0.1).unwrap();
        let r = reset(s);
        assert_eq!(r, PidState::default());
        assert_eq!(reset(r), r);
        // no derivative kick after reset
        let (u, _) = pid_step(&gains(0.0, 0.0, 1.0), r, 100.0, 0.1).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn align_inside_deadband_stops() {
        assert_eq!(
            align_command(0.0, 0.0, 5.0, 0.0, 0.0),
            vec![MotionCommand::STOP]
        );
        assert_eq!(
            align_command(0.3, 0.3, 5.0, 4.0, -5.0),
            vec![MotionCommand::STOP]
        );
    }

    #[test]
    fn align_right_rotates_cw() {
        let cmds = align_command(0.4, 0.0, 5.0, 100.0, 0.0);
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].kind(), MotionKind::RotateCw);
        assert!(cmds[0].magnitude() > 0.0);
    }

    #[test]
    fn align_never_backs_up() {
        let cmds = align_command(0.0, -3.0, 5.0, 0.0, -200.0);
        assert_eq!(cmds, vec![MotionCommand::STOP]);
        let cmds = align_command(0.0, 3.0, 5.0, 0.0, 200.0);
        assert_eq!(cmds[0].kind(), MotionKind::Forward);
        assert_eq!(cmds[0].magnitude(), 1.0);
    }

    #[test]
    fn motion_command_invariants() {
        assert!(MotionCommand::new(MotionKind::Stop, 0.5).is_err());
        assert!(MotionCommand::new(MotionKind::Forward, 0.0).is_err());
        assert!(MotionCommand::new(MotionKind::Forward, 1.5).is_err());
        assert!(MotionCommand::new(MotionKind::Forward, 1.0).is_ok());
    }
}
