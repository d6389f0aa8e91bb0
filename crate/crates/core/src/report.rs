//! Run outputs: the JSON report, the per-tick trajectory CSV and the
//! detection log (JSON lines).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mission::{Detection, Phase};
use crate::scenario::ScenarioConfig;
use crate::sim::MissReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Picked,
    Missed,
    Unreachable,
}

/// One try at grasping an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// Sim time of the grip closure or of the rejected arm move, s.
    pub time_s: f64,
    /// Arm target of the attempt, arm frame, mm.
    pub target_mm: [i32; 3],
    pub outcome: AttemptOutcome,
    /// `null` unless the outcome is `missed`.
    pub miss_reason: Option<MissReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub picked: u32,
    /// Objects that ended up in the bin.
    pub binned: u32,
    pub attempts: Vec<Attempt>,
    pub sim_duration_s: f64,
    pub ticks: u64,
    pub detection_frames: u64,
    pub commands_sent: u64,
    /// Transmissions the receiver could not decode.
    pub link_errors: u64,
    pub final_state: Phase,
    pub config: ScenarioConfig,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report always serializes");
        s.push('\n');
        s
    }
}

/// One control tick, taken after the tick's commands are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub phase: Phase,
    /// Frame body of the last command sent this tick, empty if none.
    pub last_command: String,
    /// One letter per object in scenario order: G ground, H held, B binned.
    pub objects: String,
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "time",
            "x",
            "y",
            "heading",
            "phase",
            "last_command",
            "objects",
        ])
        .expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

/// One detector frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    /// Frame time, s.
    pub t: f64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for LogError {}

pub fn detection_log_jsonl(records: &[DetectionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record always serializes"));
        out.push('\n');
    }
    out
}

/// Parse a detection log. Blank lines are skipped; times must be finite
/// and non-decreasing.
pub fn parse_detection_log(text: &str) -> Result<Vec<DetectionRecord>, LogError> {
    let mut out: Vec<DetectionRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(raw).map_err(|e| {
            // serde_json counts lines within the record; only the column is useful.
            let text = e.to_string();
            let head = text.split(" at line ").next().unwrap_or(&text);
            LogError {
                line,
                message: format!("{head} (column {})", e.column()),
            }
        })?;
        if !rec.t.is_finite() {
            return Err(LogError {
                line,
                message: "t must be finite".into(),
            });
        }
        if let Some(prev) = out.last() {
            if rec.t < prev.t {
                return Err(LogError {
                    line,
                    message: format!("t = {} goes back in time (previous {})", rec.t, prev.t),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}
