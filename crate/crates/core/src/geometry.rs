//! Camera model, pixel centering errors and ground-plane ranging.
//!
//! Conventions used throughout:
//!
//! - Pixel `x` grows rightward and pixel `y` grows with the row index.
//! - The camera is tilted `tilt_angle` away from the vertical. A pixel row
//!   `y` sees the ground along a ray whose angle from the vertical is
//!   `tilt_angle + atan((y - cy) / f)`, so the last row (`y = image_height`)
//!   is the ray `half_view_angle` past the optical axis and lands farthest
//!   from the robot.
//! - Distances are in centimeters and angles in radians.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(&'static str),
    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max}): min must be below max")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("ray at {angle:.6} rad from vertical never reaches the ground")]
    RayMissesGround { angle: f64 },
}

/// Pinhole camera looking down at a flat ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Half of the vertical view angle.
    pub half_view_angle: f64,
    /// Tilt of the optical axis away from the vertical.
    pub tilt_angle: f64,
    /// Height of the optical center above the ground, cm.
    pub mount_height: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Horizontal distance from the camera to the arm base along the
    /// forward axis, cm.
    pub arm_base_offset: f64,
}

impl CameraModel {
    pub fn new(
        half_view_angle: f64,
        tilt_angle: f64,
        mount_height: f64,
        image_width: u32,
        image_height: u32,
        arm_base_offset: f64,
    ) -> Result<Self, GeometryError> {
        let camera = Self {
            half_view_angle,
            tilt_angle,
            mount_height,
            image_width,
            image_height,
            arm_base_offset,
        };
        camera.validate()?;
        Ok(camera)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        use GeometryError::InvalidCamera;
        if !(self.half_view_angle > 0.0 && self.half_view_angle < FRAC_PI_2) {
            return Err(InvalidCamera("half_view_angle must lie in (0, pi/2)"));
        }
        if !(self.tilt_angle >= 0.0 && self.tilt_angle < FRAC_PI_2) {
            return Err(InvalidCamera("tilt_angle must lie in [0, pi/2)"));
        }
        if self.half_view_angle + self.tilt_angle >= FRAC_PI_2 {
            return Err(InvalidCamera(
                "half_view_angle + tilt_angle must stay below pi/2",
            ));
        }
        if !(self.mount_height > 0.0 && self.mount_height.is_finite()) {
            return Err(InvalidCamera("mount_height must be positive"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(InvalidCamera("image dimensions must be positive"));
        }
        if !self.arm_base_offset.is_finite() {
            return Err(InvalidCamera("arm_base_offset must be finite"));
        }
        Ok(())
    }

    /// Focal length in pixels, from the vertical view angle.
    pub fn focal_length(&self) -> f64 {
        (self.image_height as f64 / 2.0) / self.half_view_angle.tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned pixel box. Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        // Written so that NaN coordinates also fail.
        if self.x_min < self.x_max && self.y_min < self.y_max {
            Ok(())
        } else {
            Err(GeometryError::InvalidBox {
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: self.y_max,
            })
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

/// Pixel offset of the object center from the frame center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentError {
    pub dx: f64,
    pub dy: f64,
}

impl AlignmentError {
    pub fn is_zero(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }
}

/// Horizontal ground position relative to the camera foot point, cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint {
    pub forward: f64,
    /// Positive to the right of the optical axis.
    pub lateral: f64,
}

/// Frame center. Odd dimensions give half-integer centers.
pub fn frame_center(camera: &CameraModel) -> PixelPoint {
    PixelPoint::new(
        camera.image_width as f64 / 2.0,
        camera.image_height as f64 / 2.0,
    )
}

pub fn bbox_center(b: &BoundingBox) -> Result<PixelPoint, GeometryError> {
    b.validate()?;
    Ok(PixelPoint::new(
        (b.x_min + b.x_max) / 2.0,
        (b.y_min + b.y_max) / 2.0,
    ))
}

pub fn alignment_error(frame_c: PixelPoint, obj_c: PixelPoint) -> AlignmentError {
    AlignmentError {
        dx: obj_c.x - frame_c.x,
        dy: obj_c.y - frame_c.y,
    }
}

/// `h * tan(theta1 + theta2)`: the ground distance of the ray through the
/// last image row.
pub fn ground_distance_closed_form(camera: &CameraModel) -> Result<f64, GeometryError> {
    let angle = camera.half_view_angle + camera.tilt_angle;
    if angle >= FRAC_PI_2 {
        return Err(GeometryError::RayMissesGround { angle });
    }
    Ok(camera.mount_height * angle.tan())
}

/// Angle from the vertical of the ray through pixel row `p.y`.
pub fn ray_angle(camera: &CameraModel, p: PixelPoint) -> f64 {
    let cy = camera.image_height as f64 / 2.0;
    camera.tilt_angle + ((p.y - cy) / camera.focal_length()).atan()
}

/// Forward ground distance seen through pixel `p`.
pub fn ground_distance_ray(camera: &CameraModel, p: PixelPoint) -> Result<f64, GeometryError> {
    let angle = ray_angle(camera, p);
    if !(angle < FRAC_PI_2) {
        return Err(GeometryError::RayMissesGround { angle });
    }
    Ok(camera.mount_height * angle.tan())
}

/// Full ground position (forward and lateral) seen through pixel `p`.
///
/// The lateral component reuses the focal length of the vertical axis,
/// i.e. pixels are square.
pub fn ground_point(camera: &CameraModel, p: PixelPoint) -> Result<GroundPoint, GeometryError> {
    let forward = ground_distance_ray(camera, p)?;
    let c = frame_center(camera);
    let f = camera.focal_length();
    let (sin_t, cos_t) = camera.tilt_angle.sin_cos();
    // Depth of the ground point along the optical axis, divided by f.
    let depth_over_f = camera.mount_height / (f * cos_t - (p.y - c.y) * sin_t);
    Ok(GroundPoint {
        forward,
        lateral: depth_over_f * (p.x - c.x),
    })
}

/// Translate a camera-relative ground position into the arm-base frame:
/// `x` is lateral (right positive), `y` is forward from the arm base.
pub fn camera_to_arm_frame(d: f64, lateral: f64, camera: &CameraModel) -> (f64, f64) {
    (lateral, d - camera.arm_base_offset)
}
