use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("confidence {0} outside [0, 1]")]
pub struct InvalidConfidence(pub f64);

/// One detector output: what, how sure, and where in the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection")]
pub struct Detection {
    #[serde(rename = "class")]
    pub class_label: String,
    pub confidence: f64,
    pub bbox: BoundingBox,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    class: String,
    confidence: f64,
    bbox: BoundingBox,
}

impl TryFrom<RawDetection> for Detection {
    type Error = InvalidConfidence;

    fn try_from(r: RawDetection) -> Result<Self, Self::Error> {
        Detection::new(r.class, r.confidence, r.bbox)
    }
}

impl Detection {
    pub fn new(
        class_label: impl Into<String>,
        confidence: f64,
        bbox: BoundingBox,
    ) -> Result<Self, InvalidConfidence> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(InvalidConfidence(confidence));
        }
        Ok(Self {
            class_label: class_label.into(),
            confidence,
            bbox,
        })
    }
}

/// Ranking used everywhere a single target must be chosen: confidence
/// descending, then larger box, then leftmost box.
pub fn rank(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| b.bbox.area().total_cmp(&a.bbox.area()))
        .then_with(|| a.bbox.x_min.total_cmp(&b.bbox.x_min))
}

/// Keep targeted classes at or above the confidence gate, best first.
pub fn filter_detections(
    dets: &[Detection],
    threshold: f64,
    target_classes: &BTreeSet<String>,
) -> Vec<Detection> {
    let mut out: Vec<Detection> = dets
        .iter()
        .filter(|d| target_classes.contains(&d.class_label) && d.confidence >= threshold)
        .cloned()
        .collect();
    out.sort_by(rank);
    out
}
