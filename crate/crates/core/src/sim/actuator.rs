use serde::{Deserialize, Serialize};

use super::world::{ArmMotion, ObjectStatus, WorldState};
use crate::kinematics::{
    forward_kinematics, inverse_kinematics, quantize, static_torque_check, ArmGeometry, ArmServos,
    GripperModel, JointAngles, LinkMasses, Point3, ServoCalibration, TorqueCheck,
};
use crate::protocol::{Ack, AckCode, Command, Direction, GripAction};

/// Horizontal distance within which a closing gripper catches an object, cm.
pub const PICK_TOLERANCE: f64 = 2.0;

/// A released object lands in the bin when the tip is this close to the
/// bin pose, cm.
pub const BIN_TOLERANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorModel {
    /// Base speed at full command, cm/s.
    pub base_speed: f64,
    /// Base yaw rate at full command, rad/s.
    pub yaw_rate: f64,
    /// Servo slew rate, deg/s.
    pub servo_slew: f64,
    /// Delay between receiving an arm or gripper command and motion, s.
    pub command_latency: f64,
    /// Drive wheel radius, cm. Bounds `base_speed` with `motor_rpm`.
    pub wheel_radius: f64,
    pub motor_rpm: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            base_speed: 20.0,
            yaw_rate: 0.5,
            servo_slew: 120.0,
            command_latency: 0.02,
            wheel_radius: 3.0,
            motor_rpm: 300.0,
        }
    }
}

impl ActuatorModel {
    /// Unloaded wheel rim speed, cm/s.
    pub fn no_load_speed(&self) -> f64 {
        self.motor_rpm / 60.0 * std::f64::consts::TAU * self.wheel_radius
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("base_speed", self.base_speed),
            ("yaw_rate", self.yaw_rate),
            ("servo_slew", self.servo_slew),
            ("command_latency", self.command_latency),
            ("wheel_radius", self.wheel_radius),
            ("motor_rpm", self.motor_rpm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be > 0"));
            }
        }
        if self.base_speed > self.no_load_speed() {
            return Err(format!(
                "base_speed exceeds the no-load wheel speed of {:.1} cm/s",
                self.no_load_speed()
            ));
        }
        Ok(())
    }
}

/// Everything about the robot hardware the simulator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotModel {
    pub actuator: ActuatorModel,
    pub geometry: ArmGeometry,
    pub calibration: ServoCalibration,
    pub servos: ArmServos,
    pub masses: LinkMasses,
    pub gripper: GripperModel,
    pub safety_factor: f64,
    /// Arm base ahead of the camera, cm.
    pub arm_base_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    TooFar,
    Aperture,
    Torque,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PickOutcome {
    /// Index of the object caught.
    Success(usize),
    Miss(MissReason),
}

/// What a command did this tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Effect {
    /// `None` while an arm or gripper motion is still running.
    pub ack: Option<Ack>,
    /// Set when the command was a grip closure.
    pub pick: Option<PickOutcome>,
}

impl Effect {
    fn done(ack: Ack) -> Self {
        Self {
            ack: Some(ack),
            pick: None,
        }
    }
}

/// Gripper tip in world coordinates (x, y, z), cm.
pub fn tip_world(w: &WorldState, robot: &RobotModel, q: &JointAngles) -> Point3 {
    let tip = forward_kinematics(&robot.geometry, &robot.calibration, q);
    let (x, y) = w.robot.to_world(robot.arm_base_offset + tip.y, tip.x);
    Point3::new(x, y, tip.z)
}

/// Decide whether closing the gripper at pose `q` with the jaws opened to
/// `aperture_mm` catches an object. Checks run in order: distance,
/// aperture, torque. On success the object is marked held.
pub fn resolve_pick(
    w: &mut WorldState,
    robot: &RobotModel,
    q: &JointAngles,
    aperture_mm: f64,
) -> PickOutcome {
    let tip = tip_world(w, robot, q);
    let nearest = w
        .on_ground()
        .map(|(i, o)| (i, (o.x - tip.x).hypot(o.y - tip.y)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let Some((idx, dist)) = nearest else {
        return PickOutcome::Miss(MissReason::TooFar);
    };
    if dist > PICK_TOLERANCE {
        return PickOutcome::Miss(MissReason::TooFar);
    }
    let obj = &w.objects[idx];
    if aperture_mm < obj.diameter_mm {
        return PickOutcome::Miss(MissReason::Aperture);
    }
    let check = static_torque_check(
        &robot.geometry,
        &robot.calibration,
        q,
        obj.mass_g,
        &robot.servos,
        &robot.masses,
        robot.safety_factor,
    );
    if let TorqueCheck::Exceeded { .. } = check {
        return PickOutcome::Miss(MissReason::Torque);
    }
    w.objects[idx].status = ObjectStatus::Held;
    w.holding = Some(idx);
    PickOutcome::Success(idx)
}

fn quantize_joints(q: &JointAngles, servos: &ArmServos) -> JointAngles {
    let mut out = *q;
    for joint in JointAngles::ALL {
        *out.get_mut(joint) = quantize(q, servos.get(joint)).0.get(joint);
    }
    out
}

fn start_motion(
    w: &mut WorldState,
    robot: &RobotModel,
    target: JointAngles,
    fails_grip: bool,
    releases: bool,
) {
    w.motion = Some(ArmMotion {
        target,
        latency_left: robot.actuator.command_latency,
        fails_grip,
        releases,
    });
}

fn integrate_move(w: &mut WorldState, model: &ActuatorModel, dir: Direction, speed: u8, dt: f64) {
    let scale = speed as f64 / 255.0;
    let step = model.base_speed * scale * dt;
    let (forward, right) = match dir {
        Direction::Forward => (step, 0.0),
        Direction::Backward => (-step, 0.0),
        Direction::Left => (0.0, -step),
        Direction::Right => (0.0, step),
        Direction::Cw => {
            w.robot.heading -= model.yaw_rate * scale * dt;
            return;
        }
        Direction::Ccw => {
            w.robot.heading += model.yaw_rate * scale * dt;
            return;
        }
    };
    let (x, y) = w.robot.to_world(forward, right);
    w.robot.x = x;
    w.robot.y = y;
}

/// Apply a decoded command to the world.
///
/// Base motion is integrated for `dt` and acknowledged at once; a base
/// command is a dead-man command that only lasts one tick. Arm and gripper
/// commands start a motion that [`advance`] carries forward; their ack
/// comes when it ends. Grip closure is resolved when the command arrives,
/// against the pose the arm is in.
pub fn apply_command(w: &mut WorldState, robot: &RobotModel, c: &Command, dt: f64) -> Effect {
    if w.motion.is_some() && !matches!(c, Command::Move { .. } | Command::Stop) {
        // Stop-and-wait makes this unreachable from the planner.
        return Effect::done(Ack::Err(AckCode::MALFORMED));
    }
    match *c {
        Command::Move { dir, speed } => {
            integrate_move(w, &robot.actuator, dir, speed, dt);
            Effect::done(Ack::Ok)
        }
        Command::Stop => Effect::done(Ack::Ok),
        Command::ArmTo { x_mm, y_mm, z_mm } => {
            let target = Point3::new(x_mm as f64 / 10.0, y_mm as f64 / 10.0, z_mm as f64 / 10.0);
            match inverse_kinematics(&robot.geometry, &robot.calibration, target, &w.joints) {
                Ok(q) => {
                    start_motion(w, robot, quantize_joints(&q, &robot.servos), false, false);
                    Effect::default()
                }
                Err(_) => Effect::done(Ack::Err(AckCode::UNREACHABLE)),
            }
        }
        Command::Grip(GripAction::Close) => {
            let aperture = crate::kinematics::gripper_aperture(w.joints.gripper, &robot.gripper)
                .unwrap_or(0.0);
            let joints = w.joints;
            let outcome = resolve_pick(w, robot, &joints, aperture);
            let mut target = w.joints;
            let fails = match outcome {
                PickOutcome::Success(i) => {
                    target.gripper = robot.gripper.angle_for_aperture(w.objects[i].diameter_mm);
                    false
                }
                PickOutcome::Miss(_) => {
                    target.gripper = 0.0;
                    true
                }
            };
            start_motion(w, robot, target, fails, false);
            Effect {
                ack: None,
                pick: Some(outcome),
            }
        }
        Command::Grip(GripAction::Open) => {
            let mut target = w.joints;
            target.gripper = JointAngles::HOME.gripper;
            start_motion(w, robot, target, false, true);
            Effect::default()
        }
        Command::Home => {
            let mut target = JointAngles::HOME;
            if w.holding.is_some() {
                target.gripper = w.joints.gripper;
            }
            start_motion(w, robot, target, false, false);
            Effect::default()
        }
    }
}

fn release(w: &mut WorldState, robot: &RobotModel) {
    let Some(idx) = w.holding.take() else {
        return;
    };
    let joints = w.joints;
    let tip = forward_kinematics(&robot.geometry, &robot.calibration, &joints);
    let b = w.bin_pose;
    if tip.distance(&Point3::new(b[0], b[1], b[2])) <= BIN_TOLERANCE {
        w.objects[idx].status = ObjectStatus::Binned;
        w.bin_fill += 1;
    } else {
        let p = tip_world(w, robot, &joints);
        let obj = &mut w.objects[idx];
        obj.status = ObjectStatus::Ground;
        obj.x = p.x;
        obj.y = p.y;
    }
}

/// Progress an arm motion by `dt`. Returns the ack once the servos reach
/// their targets.
pub fn advance(w: &mut WorldState, robot: &RobotModel, dt: f64) -> Option<Ack> {
    let mut m = w.motion?;
    let mut t = dt;
    if m.latency_left > 0.0 {
        let used = m.latency_left.min(t);
        m.latency_left -= used;
        t -= used;
    }
    let max_step = robot.actuator.servo_slew * t;
    let mut arrived = m.latency_left <= 0.0;
    for joint in JointAngles::ALL {
        let cur = w.joints.get_mut(joint);
        let delta = m.target.get(joint) - *cur;
        if delta.abs() <= max_step {
            *cur = m.target.get(joint);
        } else {
            *cur += max_step.copysign(delta);
            arrived = false;
        }
    }
    if !arrived {
        w.motion = Some(m);
        return None;
    }
    w.motion = None;
    if m.releases {
        release(w, robot);
    }
    Some(if m.fails_grip {
        Ack::Err(AckCode::GRIP_FAILED)
    } else {
        Ack::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::gripper_aperture;
    use crate::sim::world::{Pose, WorldObject};

    fn robot() -> RobotModel {
        RobotModel {
            actuator: ActuatorModel::default(),
            geometry: ArmGeometry::default(),
            calibration: ServoCalibration::default(),
            servos: ArmServos::default(),
            masses: LinkMasses::default(),
            gripper: GripperModel::default(),
            safety_factor: 1.0,
            arm_base_offset: 5.0,
        }
    }

    fn object_at(x: f64, y: f64, mass_g: f64) -> WorldObject {
        WorldObject {
            class: "bottle".into(),
            x,
            y,
            diameter_mm: 30.0,
            mass_g,
            status: ObjectStatus::Ground,
        }
    }

    fn settle(w: &mut WorldState, r: &RobotModel) -> Ack {
        for _ in 0..1000 {
            if let Some(a) = advance(w, r, 0.05) {
                return a;
            }
        }
        panic!("motion never finished");
    }

    #[test]
    fn full_forward_for_one_second() {
        let r = robot();
        let mut w = WorldState::new(Pose::default(), vec![], [0.0; 3]);
        for _ in 0..20 {
            apply_command(
                &mut w,
                &r,
                &Command::Move {
                    dir: Direction::Forward,
                    speed: 255,
                },
                0.05,
            );
        }
        assert!((w.robot.x - 20.0).abs() < 1e-9 && w.robot.y.abs() < 1e-12);
    }

    #[test]
    fn strafe_and_rotate_directions() {
        let r = robot();
        let mut w = WorldState::new(Pose::default(), vec![], [0.0; 3]);
        apply_command(
            &mut w,
            &r,
            &Command::Move {
                dir: Direction::Left,
                speed: 255,
            },
            1.0,
        );
        assert!((w.robot.y - 20.0).abs() < 1e-9);
        apply_command(
            &mut w,
            &r,
            &Command::Move {
                dir: Direction::Ccw,
                speed: 255,
            },
            1.0,
        );
        assert!((w.robot.heading - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stop_leaves_pose() {
        let r = robot();
        let mut w = WorldState::new(
            Pose {
                x: 1.0,
                y: 2.0,
                heading: 0.3,
            },
            vec![],
            [0.0; 3],
        );
        let before = w.robot;
        assert_eq!(
            apply_command(&mut w, &r, &Command::Stop, 5.0).ack,
            Some(Ack::Ok)
        );
        assert_eq!(w.robot, before);
    }

    #[test]
    fn arm_out_of_reach_is_rejected() {
        let r = robot();
        let mut w = WorldState::new(Pose::default(), vec![], [0.0; 3]);
        let before = w.clone();
        let e = apply_command(
            &mut w,
            &r,
            &Command::ArmTo {
                x_mm: 0,
                y_mm: 900,
                z_mm: 50,
            },
            0.05,
        );
        assert_eq!(e.ack, Some(Ack::Err(AckCode::UNREACHABLE)));
        assert_eq!(w, before);
    }

    #[test]
    fn arm_motion_respects_slew() {
        let r = robot();
        let mut w = WorldState::new(Pose::default(), vec![], [0.0; 3]);
        let e = apply_command(
            &mut w,
            &r,
            &Command::ArmTo {
                x_mm: 0,
                y_mm: 300,
                z_mm: 50,
            },
            0.05,
        );
        assert_eq!(e.ack, None);
        let start = w.joints;
        assert_eq!(advance(&mut w, &r, 0.05), None);
        for j in JointAngles::ALL {
            // 0.03 s of motion after the 0.02 s latency.
            assert!((w.joints.get(j) - start.get(j)).abs() <= 120.0 * 0.03 + 1e-9);
        }
        assert_eq!(settle(&mut w, &r), Ack::Ok);
        let tip = forward_kinematics(&r.geometry, &r.calibration, &w.joints);
        assert!(tip.distance(&Point3::new(0.0, 30.0, 5.0)) < 1.0);
    }

    fn tip_over(r: &RobotModel, arm_y: f64) -> (WorldState, JointAngles) {
        let w = WorldState::new(Pose::default(), vec![], [0.0; 3]);
        let q = inverse_kinematics(
            &r.geometry,
            &r.calibration,
            Point3::new(0.0, arm_y, 5.0),
            &JointAngles::HOME,
        )
        .unwrap();
        (w, q)
    }

    #[test]
    fn pick_outcomes() {
        let r = robot();
        let (mut w, q) = tip_over(&r, 30.0);
        w.objects = vec![object_at(35.0, 0.0, 200.0)];
        assert_eq!(resolve_pick(&mut w, &r, &q, 60.0), PickOutcome::Success(0));
        assert_eq!(w.objects[0].status, ObjectStatus::Held);

        w.objects = vec![object_at(37.5, 0.0, 200.0)];
        assert_eq!(
            resolve_pick(&mut w, &r, &q, 60.0),
            PickOutcome::Miss(MissReason::TooFar)
        );
        w.objects = vec![object_at(35.0, 0.0, 200.0)];
        assert_eq!(
            resolve_pick(&mut w, &r, &q, 20.0),
            PickOutcome::Miss(MissReason::Aperture)
        );
        w.objects = vec![object_at(35.0, 0.0, 2500.0)];
        assert_eq!(
            resolve_pick(&mut w, &r, &q, 60.0),
            PickOutcome::Miss(MissReason::Torque)
        );
        w.objects.clear();
        assert_eq!(
            resolve_pick(&mut w, &r, &q, 60.0),
            PickOutcome::Miss(MissReason::TooFar)
        );
    }

    #[test]
    fn grip_pick_and_bin() {
        let r = robot();
        let mut w = WorldState::new(
            Pose::default(),
            vec![object_at(35.0, 0.0, 150.0)],
            [-20.0, 15.0, 20.0],
        );
        apply_command(
            &mut w,
            &r,
            &Command::ArmTo {
                x_mm: 0,
                y_mm: 300,
                z_mm: 50,
            },
            0.05,
        );
        assert_eq!(settle(&mut w, &r), Ack::Ok);
        let e = apply_command(&mut w, &r, &Command::Grip(GripAction::Close), 0.05);
        assert_eq!(e.pick, Some(PickOutcome::Success(0)));
        assert_eq!(settle(&mut w, &r), Ack::Ok);
        assert!((gripper_aperture(w.joints.gripper, &r.gripper).unwrap() - 30.0).abs() < 1e-9);
        apply_command(
            &mut w,
            &r,
            &Command::ArmTo {
                x_mm: -200,
                y_mm: 150,
                z_mm: 200,
            },
            0.05,
        );
        assert_eq!(settle(&mut w, &r), Ack::Ok);
        apply_command(&mut w, &r, &Command::Grip(GripAction::Open), 0.05);
        assert_eq!(settle(&mut w, &r), Ack::Ok);
        assert_eq!(
            (w.objects[0].status, w.bin_fill, w.holding),
            (ObjectStatus::Binned, 1, None)
        );
    }

    #[test]
    fn failed_grip_acks_error() {
        let r = robot();
        let mut w = WorldState::new(Pose::default(), vec![object_at(80.0, 0.0, 150.0)], [0.0; 3]);
        let e = apply_command(&mut w, &r, &Command::Grip(GripAction::Close), 0.05);
        assert_eq!(e.pick, Some(PickOutcome::Miss(MissReason::TooFar)));
        assert_eq!(settle(&mut w, &r), Ack::Err(AckCode::GRIP_FAILED));
        assert_eq!(w.joints.gripper, 0.0);
    }

    #[test]
    fn default_speed_below_no_load() {
        let m = ActuatorModel::default();
        assert!((m.no_load_speed() - 94.2477).abs() < 1e-3);
        assert!(m.validate().is_ok());
        assert!(ActuatorModel {
            base_speed: 100.0,
            ..m
        }
        .validate()
        .is_err());
    }
}
