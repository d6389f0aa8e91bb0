//! Sense-plan-act state machine.
//!
//! ```text
//! Search --lock--> Align --centered--> Range --in workspace--> Pick --acks--> Deposit --> Search | Done
//!                    |                   |                     |
//!                    +--lost--> Search   +--> Approach <-------+ (unreachable / grip failed)
//! ```
//!
//! [`Planner::step`] is a pure function of the previous state and the
//! tick's inputs. Commands come out already in wire vocabulary.

mod detection;

pub use detection::{filter_detections, rank, Detection, InvalidConfidence};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    self, align_command, is_aligned, pid_step, MotionCommand, MotionKind, PidGains, PidState,
};
use crate::geometry::{self, alignment_error, bbox_center, frame_center, CameraModel};
use crate::kinematics::{in_workspace, Point3, WorkspaceBounds};
use crate::protocol::{Ack, AckCode, Command, Direction, GripAction};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid mission config: {0}")]
pub struct MissionConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub confidence_threshold: f64,
    pub target_classes: BTreeSet<String>,
    /// Alignment deadband, pixels.
    pub deadband: f64,
    /// Seconds between detector frames.
    pub detection_period: f64,
    /// Seconds between control ticks.
    pub control_period: f64,
    /// Successful picks after which the mission is done.
    pub pick_count: u32,
    /// Drop-off point for picked objects, arm frame, cm.
    pub bin_pose: [f64; 3],
    /// Height of the gripper tip when grasping, cm.
    pub pick_height: f64,
    /// Preferred forward distance of the target from the arm base, cm.
    pub standoff: f64,
    /// Accepted deviation from `standoff` before picking, cm.
    pub approach_tolerance: f64,
    /// Approach command magnitude per cm of remaining distance.
    pub approach_gain: f64,
    /// Wire speed of the search rotation.
    pub scan_speed: u8,
    /// Minimum IoU for a detection to keep the current lock.
    pub iou_threshold: f64,
    /// Fallback re-acquisition radius around the lock center, pixels.
    pub reacquire_radius: f64,
    /// Detection frames without the target tolerated before searching again.
    pub lost_limit: u32,
    /// Retries after an unreachable target or a failed grip.
    pub max_retries: u32,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.90,
            target_classes: ["bottle".to_string()].into(),
            deadband: 5.0,
            detection_period: 1.0 / 3.5,
            control_period: 0.05,
            pick_count: 1,
            bin_pose: [-20.0, 15.0, 20.0],
            pick_height: 5.0,
            standoff: 28.0,
            approach_tolerance: 4.0,
            approach_gain: 0.05,
            scan_speed: 64,
            iou_threshold: 0.3,
            reacquire_radius: 120.0,
            lost_limit: 3,
            max_retries: 2,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), MissionConfigError> {
        let err = |m: &str| Err(MissionConfigError(m.to_string()));
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return err("confidence_threshold must lie in [0, 1]");
        }
        if !(self.deadband >= 0.0) {
            return err("deadband must be >= 0");
        }
        if !(self.detection_period > 0.0 && self.detection_period.is_finite()) {
            return err("detection_period must be > 0");
        }
        if !(self.control_period > 0.0 && self.control_period.is_finite()) {
            return err("control_period must be > 0");
        }
        if !(self.approach_tolerance > 0.0) {
            return err("approach_tolerance must be > 0");
        }
        if !(self.approach_gain > 0.0) {
            return err("approach_gain must be > 0");
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return err("iou_threshold must lie in [0, 1]");
        }
        if !(self.reacquire_radius >= 0.0) {
            return err("reacquire_radius must be >= 0");
        }
        if self.scan_speed == 0 {
            return err("scan_speed must be > 0");
        }
        if self
            .bin_pose
            .iter()
            .chain([&self.pick_height, &self.standoff])
            .any(|v| !v.is_finite())
        {
            return err("bin_pose, pick_height and standoff must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Search,
    Align,
    Range,
    Approach,
    Pick,
    Deposit,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Mission state. Everything the planner remembers between ticks lives
/// here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionState {
    pub phase: Phase,
    /// Locked target, as last seen.
    pub lock: Option<Detection>,
    /// Last range result in the arm frame, cm.
    pub target: Option<Point3>,
    pub pid_x: PidState,
    pub pid_y: PidState,
    /// Clock of the last PID update.
    pub last_update: Option<f64>,
    /// Motion re-issued on control ticks between detector frames.
    pub held: Vec<Command>,
    /// Consecutive detection frames without the locked target.
    pub lost_frames: u32,
    pub retries: u32,
    /// Arm and gripper commands sent but not yet acknowledged.
    pub arm_pending: u32,
    pub picked: u32,
}

impl Default for MissionState {
    fn default() -> Self {
        Self {
            phase: Phase::Search,
            lock: None,
            target: None,
            pid_x: PidState::default(),
            pid_y: PidState::default(),
            last_update: None,
            held: Vec::new(),
            lost_frames: 0,
            retries: 0,
            arm_pending: 0,
            picked: 0,
        }
    }
}

/// Inputs for one control tick.
#[derive(Debug, Clone, Default)]
pub struct StepInput<'a> {
    pub clock: f64,
    /// Present on detector frames only.
    pub detections: Option<&'a [Detection]>,
    /// Acknowledgements received since the last tick, with the command each
    /// one answers, in order.
    pub acks: &'a [(Command, Ack)],
}

/// Everything the planner needs besides its state.
#[derive(Debug, Clone, PartialEq)]
pub struct Planner {
    pub mission: MissionConfig,
    pub gains: PidGains,
    pub camera: CameraModel,
    pub workspace: WorkspaceBounds,
}

pub fn speed_byte(magnitude: f64) -> u8 {
    ((magnitude.clamp(0.0, 1.0) * 255.0).round() as u8).max(1)
}

pub fn motion_to_wire(m: &MotionCommand) -> Command {
    let dir = match m.kind() {
        MotionKind::Stop => return Command::Stop,
        MotionKind::Forward => Direction::Forward,
        MotionKind::Backward => Direction::Backward,
        MotionKind::StrafeLeft => Direction::Left,
        MotionKind::StrafeRight => Direction::Right,
        MotionKind::RotateCw => Direction::Cw,
        MotionKind::RotateCcw => Direction::Ccw,
    };
    Command::Move {
        dir,
        speed: speed_byte(m.magnitude()),
    }
}

/// Centimeters to wire millimeters.
pub fn to_mm(cm: f64) -> i32 {
    (cm * 10.0).round() as i32
}

fn arm_to(p: Point3) -> Command {
    Command::ArmTo {
        x_mm: to_mm(p.x),
        y_mm: to_mm(p.y),
        z_mm: to_mm(p.z),
    }
}

fn is_arm_command(c: &Command) -> bool {
    matches!(c, Command::ArmTo { .. } | Command::Grip(_) | Command::Home)
}

impl Planner {
    pub fn initial_state(&self) -> MissionState {
        MissionState::default()
    }

    fn accepted(&self, dets: &[Detection]) -> Vec<Detection> {
        filter_detections(
            dets,
            self.mission.confidence_threshold,
            &self.mission.target_classes,
        )
    }

    /// Find the locked target among accepted detections: best IoU at or
    /// above the threshold, else the nearest center inside the
    /// re-acquisition radius.
    fn match_lock(&self, lock: &Detection, accepted: &[Detection]) -> Option<Detection> {
        let by_iou = accepted
            .iter()
            .map(|d| (lock.bbox.iou(&d.bbox), d))
            .filter(|(iou, _)| *iou >= self.mission.iou_threshold)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, d)) = by_iou {
            return Some(d.clone());
        }
        let lc = bbox_center(&lock.bbox).ok()?;
        accepted
            .iter()
            .filter_map(|d| {
                let c = bbox_center(&d.bbox).ok()?;
                let dist = (c.x - lc.x).hypot(c.y - lc.y);
                (dist <= self.mission.reacquire_radius).then_some((dist, d))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, d)| d.clone())
    }

    /// Arm-frame position of a detection: box center ray cast onto the
    /// ground, shifted to the arm base, at pick height.
    pub fn range(&self, det: &Detection) -> Option<Point3> {
        let c = bbox_center(&det.bbox).ok()?;
        let gp = geometry::ground_point(&self.camera, c).ok()?;
        let (x, y) = geometry::camera_to_arm_frame(gp.forward, gp.lateral, &self.camera);
        Some(Point3::new(x, y, self.mission.pick_height))
    }

    fn pid_dt(&self, s: &MissionState, clock: f64) -> f64 {
        match s.last_update {
            Some(t) if clock > t => clock - t,
            _ => self.mission.control_period,
        }
    }

    fn search(&self, s: &mut MissionState, input: &StepInput) -> Vec<Command> {
        let scan = vec![Command::Move {
            dir: Direction::Cw,
            speed: self.mission.scan_speed,
        }];
        let Some(dets) = input.detections else {
            return scan;
        };
        match self.accepted(dets).into_iter().next() {
            Some(best) => {
                s.lock = Some(best);
                s.target = None;
                s.pid_x = controller::reset(s.pid_x);
                s.pid_y = controller::reset(s.pid_y);
                s.last_update = None;
                s.lost_frames = 0;
                s.held.clear();
                s.phase = Phase::Align;
                vec![Command::Stop]
            }
            None => scan,
        }
    }

    /// Shared lock bookkeeping for Align and Approach. Returns the updated
    /// lock, or `None` when the target is missing from this frame.
    fn track(&self, s: &mut MissionState, dets: &[Detection]) -> Option<Detection> {
        let lock = s.lock.as_ref()?;
        let accepted = self.accepted(dets);
        match self.match_lock(lock, &accepted) {
            Some(d) => {
                s.lost_frames = 0;
                s.lock = Some(d.clone());
                Some(d)
            }
            None => {
                s.lost_frames += 1;
                None
            }
        }
    }

    fn lose_target(&self, s: &mut MissionState) -> Vec<Command> {
        s.phase = Phase::Search;
        s.lock = None;
        s.target = None;
        s.held.clear();
        s.lost_frames = 0;
        s.retries = 0;
        vec![Command::Stop]
    }

    fn held_or_stop(s: &MissionState) -> Vec<Command> {
        if s.held.is_empty() {
            vec![Command::Stop]
        } else {
            s.held.clone()
        }
    }

    fn align(&self, s: &mut MissionState, input: &StepInput) -> Vec<Command> {
        let Some(dets) = input.detections else {
            return Self::held_or_stop(s);
        };
        let Some(det) = self.track(s, dets) else {
            if s.lost_frames > self.mission.lost_limit {
                return self.lose_target(s);
            }
            return Self::held_or_stop(s);
        };
        let Ok(obj) = bbox_center(&det.bbox) else {
            return self.lose_target(s);
        };
        let e = alignment_error(frame_center(&self.camera), obj);
        let dt = self.pid_dt(s, input.clock);
        let (ux, px) = pid_step(&self.gains, s.pid_x, e.dx, dt).unwrap_or((0.0, s.pid_x));
        let (uy, py) = pid_step(&self.gains, s.pid_y, e.dy, dt).unwrap_or((0.0, s.pid_y));
        s.pid_x = px;
        s.pid_y = py;
        s.last_update = Some(input.clock);
        let db = self.mission.deadband;
        if is_aligned(db, e.dx, e.dy) {
            s.held.clear();
            s.phase = Phase::Range;
            return vec![Command::Stop];
        }
        s.held = align_command(ux, uy, db, e.dx, e.dy)
            .iter()
            .map(motion_to_wire)
            .collect();
        s.held.clone()
    }

    fn range_phase(&self, s: &mut MissionState) -> Vec<Command> {
        let Some(target) = s.lock.as_ref().and_then(|d| self.range(d)) else {
            return self.lose_target(s);
        };
        s.target = Some(target);
        if in_workspace(target, &self.workspace) {
            s.phase = Phase::Pick;
            let b = self.mission.bin_pose;
            let seq = vec![
                arm_to(target),
                Command::Grip(GripAction::Close),
                arm_to(Point3::new(b[0], b[1], b[2])),
                Command::Grip(GripAction::Open),
                Command::Home,
            ];
            s.arm_pending += seq.len() as u32;
            seq
        } else {
            s.phase = Phase::Approach;
            s.held.clear();
            s.last_update = None;
            vec![Command::Stop]
        }
    }

    fn approach(&self, s: &mut MissionState, input: &StepInput) -> Vec<Command> {
        if s.arm_pending > 0 {
            return Vec::new();
        }
        let Some(dets) = input.detections else {
            return Self::held_or_stop(s);
        };
        let Some(det) = self.track(s, dets) else {
            if s.lost_frames > self.mission.lost_limit {
                return self.lose_target(s);
            }
            return Self::held_or_stop(s);
        };
        let (Some(target), Ok(obj)) = (self.range(&det), bbox_center(&det.bbox)) else {
            return self.lose_target(s);
        };
        s.target = Some(target);
        let remaining = target.y - self.mission.standoff;
        if in_workspace(target, &self.workspace)
            && remaining.abs() <= self.mission.approach_tolerance
        {
            s.held.clear();
            s.phase = Phase::Range;
            return vec![Command::Stop];
        }
        let e = alignment_error(frame_center(&self.camera), obj);
        let dt = self.pid_dt(s, input.clock);
        let (ux, px) = pid_step(&self.gains, s.pid_x, e.dx, dt).unwrap_or((0.0, s.pid_x));
        s.pid_x = px;
        s.last_update = Some(input.clock);

        let mut cmds: Vec<Command> = align_command(ux, 0.0, self.mission.deadband, e.dx, 0.0)
            .iter()
            .filter(|m| m.kind() != MotionKind::Stop)
            .map(motion_to_wire)
            .collect();
        if remaining.abs() > self.mission.approach_tolerance / 2.0 {
            let dir = if remaining > 0.0 {
                Direction::Forward
            } else {
                Direction::Backward
            };
            let speed = speed_byte(remaining.abs() * self.mission.approach_gain);
            cmds.push(Command::Move { dir, speed });
        }
        if cmds.is_empty() {
            cmds.push(Command::Stop);
        }
        s.held = cmds.clone();
        cmds
    }

    fn retry_or_abandon(&self, s: &mut MissionState, retreat: bool) -> Vec<Command> {
        s.arm_pending = 0;
        s.retries += 1;
        s.held.clear();
        s.last_update = None;
        let mut cmds = Vec::new();
        if retreat {
            cmds.push(Command::Home);
            s.arm_pending = 1;
        }
        if s.retries > self.mission.max_retries {
            s.phase = Phase::Search;
            s.lock = None;
            s.target = None;
            s.retries = 0;
        } else {
            s.phase = Phase::Approach;
        }
        cmds
    }

    fn pick(&self, s: &mut MissionState, input: &StepInput) -> Vec<Command> {
        for (cmd, ack) in input.acks {
            if !is_arm_command(cmd) {
                continue;
            }
            match ack {
                Ack::Ok => {
                    s.arm_pending = s.arm_pending.saturating_sub(1);
                    if s.arm_pending == 0 {
                        s.phase = Phase::Deposit;
                        return Vec::new();
                    }
                }
                Ack::Err(AckCode::UNREACHABLE) => return self.retry_or_abandon(s, false),
                Ack::Err(AckCode::GRIP_FAILED) => return self.retry_or_abandon(s, true),
                Ack::Err(_) => {
                    // Link or actuator fault mid-sequence: fold the arm and
                    // start over.
                    s.arm_pending = 1;
                    s.phase = Phase::Search;
                    s.lock = None;
                    s.target = None;
                    s.retries = 0;
                    return vec![Command::Home];
                }
            }
        }
        Vec::new()
    }

    fn deposit(&self, s: &mut MissionState) -> Vec<Command> {
        s.picked += 1;
        s.retries = 0;
        s.lock = None;
        s.target = None;
        s.held.clear();
        s.phase = if s.picked >= self.mission.pick_count {
            Phase::Done
        } else {
            Phase::Search
        };
        Vec::new()
    }

    /// Advance the mission by one control tick.
    pub fn step(&self, state: &MissionState, input: &StepInput) -> (MissionState, Vec<Command>) {
        let mut s = state.clone();
        if s.phase != Phase::Pick {
            // Acks for commands outside a pick sequence (e.g. the retreat
            // Home after a failed grip).
            for (cmd, _) in input.acks {
                if is_arm_command(cmd) {
                    s.arm_pending = s.arm_pending.saturating_sub(1);
                }
            }
        }
        let cmds = match s.phase {
            Phase::Search if s.arm_pending > 0 => Vec::new(),
            Phase::Search => self.search(&mut s, input),
            Phase::Align => self.align(&mut s, input),
            Phase::Range => self.range_phase(&mut s),
            Phase::Approach => self.approach(&mut s, input),
            Phase::Pick => self.pick(&mut s, input),
            Phase::Deposit => self.deposit(&mut s),
            Phase::Done => Vec::new(),
        };
        (s, cmds)
    }
}
