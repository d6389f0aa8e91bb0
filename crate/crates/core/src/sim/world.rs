use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{frame_center, BoundingBox, CameraModel, PixelPoint};
use crate::kinematics::JointAngles;
use crate::mission::Detection;

/// Robot pose on the floor. `heading` is counter-clockwise from `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    /// World point to (forward, right) in the robot frame.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        (dx * c + dy * s, dx * s - dy * c)
    }

    /// (forward, right) in the robot frame to a world point.
    pub fn to_world(&self, forward: f64, right: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (
            self.x + forward * c + right * s,
            self.y + forward * s - right * c,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectStatus {
    Ground,
    Held,
    Binned,
}

impl ObjectStatus {
    pub fn letter(&self) -> char {
        match self {
            ObjectStatus::Ground => 'G',
            ObjectStatus::Held => 'H',
            ObjectStatus::Binned => 'B',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub class: String,
    pub x: f64,
    pub y: f64,
    pub diameter_mm: f64,
    pub mass_g: f64,
    pub status: ObjectStatus,
}

/// Arm or gripper motion in progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmMotion {
    pub target: JointAngles,
    /// Actuator processing time still to elapse before the servos move.
    pub latency_left: f64,
    /// Acknowledgement to send when the motion ends.
    pub fails_grip: bool,
    /// Release the held object when the motion ends.
    pub releases: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: Pose,
    pub objects: Vec<WorldObject>,
    pub joints: JointAngles,
    pub motion: Option<ArmMotion>,
    /// Index into `objects` of the object in the gripper.
    pub holding: Option<usize>,
    /// Bin position in the arm frame, cm.
    pub bin_pose: [f64; 3],
    pub bin_fill: u32,
    pub time: f64,
}

impl WorldState {
    pub fn new(robot: Pose, objects: Vec<WorldObject>, bin_pose: [f64; 3]) -> Self {
        Self {
            robot,
            objects,
            joints: JointAngles::HOME,
            motion: None,
            holding: None,
            bin_pose,
            bin_fill: 0,
            time: 0.0,
        }
    }

    pub fn on_ground(&self) -> impl Iterator<Item = (usize, &WorldObject)> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.status == ObjectStatus::Ground)
    }
}

/// Synthetic stand-in for the neural detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorOracle {
    /// Gaussian noise on the box center, pixels.
    pub pixel_noise: f64,
    pub miss_probability: f64,
    pub confidence_mean: f64,
    pub confidence_sd: f64,
}

impl Default for DetectorOracle {
    fn default() -> Self {
        Self {
            pixel_noise: 2.0,
            miss_probability: 0.05,
            confidence_mean: 0.93,
            confidence_sd: 0.04,
        }
    }
}

impl DetectorOracle {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.pixel_noise >= 0.0 && self.pixel_noise.is_finite()) {
            return Err("pixel_noise must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.miss_probability) {
            return Err("miss_probability must lie in [0, 1)".into());
        }
        if !(self.confidence_sd >= 0.0 && self.confidence_mean.is_finite()) {
            return Err("confidence_sd must be >= 0 and confidence_mean finite".into());
        }
        Ok(())
    }
}

/// Pinhole projection of a ground point given in the camera's (forward,
/// right) frame. Returns the pixel and the depth along the optical axis,
/// or `None` for points behind the camera.
pub fn project_ground(camera: &CameraModel, forward: f64, right: f64) -> Option<(PixelPoint, f64)> {
    let h = camera.mount_height;
    let (sin_t, cos_t) = camera.tilt_angle.sin_cos();
    let depth = forward * sin_t + h * cos_t;
    if depth <= 0.0 {
        return None;
    }
    let up = forward * cos_t - h * sin_t;
    let f = camera.focal_length();
    let c = frame_center(camera);
    Some((
        PixelPoint::new(c.x + f * right / depth, c.y + f * up / depth),
        depth,
    ))
}

fn in_frame(camera: &CameraModel, p: PixelPoint) -> bool {
    (0.0..=camera.image_width as f64).contains(&p.x)
        && (0.0..=camera.image_height as f64).contains(&p.y)
}

/// Render detector output for the current world.
///
/// Each object is projected through the pinhole model; its box is a square
/// of the object's apparent diameter centered on the projection of the
/// object's center. Four draws are taken per object per frame regardless
/// of visibility, so an object leaving view or being picked never shifts
/// the draws of the others.
pub fn render_detections(
    world: &WorldState,
    camera: &CameraModel,
    oracle: &DetectorOracle,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let noise = Normal::new(0.0, oracle.pixel_noise).expect("validated sigma");
    let conf = Normal::new(oracle.confidence_mean, oracle.confidence_sd).expect("validated sigma");
    let mut out = Vec::new();
    for obj in &world.objects {
        let miss_draw: f64 = rng.random();
        let nx = noise.sample(rng);
        let ny = noise.sample(rng);
        let confidence = conf.sample(rng).clamp(0.0, 1.0);
        if obj.status != ObjectStatus::Ground || miss_draw < oracle.miss_probability {
            continue;
        }
        let (forward, right) = world.robot.to_local(obj.x, obj.y);
        let Some((p, depth)) = project_ground(camera, forward, right) else {
            continue;
        };
        if !in_frame(camera, p) {
            continue;
        }
        let half = camera.focal_length() * obj.diameter_mm / 10.0 / depth / 2.0;
        let (cx, cy) = (p.x + nx, p.y + ny);
        let Ok(bbox) = BoundingBox::new(cx - half, cy - half, cx + half, cy + half) else {
            continue;
        };
        if let Ok(d) = Detection::new(obj.class.clone(), confidence, bbox) {
            out.push(d);
        }
    }
    out
}
