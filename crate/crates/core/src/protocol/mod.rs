//! Planner/actuator line protocol.
//!
//! Every frame is one ASCII line:
//!
//! ```text
//! VERB[ ARG]*HH\n
//! ```
//!
//! `HH` is the XOR of every byte before `*`, as two uppercase hex digits.
//! Arguments are separated by single spaces and written in canonical
//! decimal (no sign on non-negative values, no leading zeros). Commands:
//!
//! | verb | arguments          | meaning                      |
//! |------|--------------------|------------------------------|
//! | MOV  | `F|B|L|R|CW|CC` speed 0-255 | drive the base      |
//! | STP  |                    | stop the base                |
//! | ARM  | x y z (mm, signed) | move the gripper tip         |
//! | GRP  | `O|C`              | open or close the gripper    |
//! | HOM  |                    | fold the arm to its home pose |
//!
//! Acknowledgements travel back as `OK*HH\n` or `ERR code*HH\n`. The XOR
//! checksum is a transmission check, not an integrity guarantee.

mod codec;
mod framing;
mod fuzz;
mod loopback;

pub use codec::{check_encodable, checksum, decode, decode_ack, encode, encode_ack, MAX_ARM_MM};
pub use framing::{Frame, FrameSplitter, MAX_LINE_LEN};
pub use fuzz::{fuzz, random_command, FuzzStats};
pub use loopback::{DirectLink, Link, Loopback, WireLink};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
    Left,
    Right,
    Cw,
    Ccw,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::Forward,
        Direction::Backward,
        Direction::Left,
        Direction::Right,
        Direction::Cw,
        Direction::Ccw,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            Direction::Forward => "F",
            Direction::Backward => "B",
            Direction::Left => "L",
            Direction::Right => "R",
            Direction::Cw => "CW",
            Direction::Ccw => "CC",
        }
    }

    fn from_token(t: &[u8]) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.token().as_bytes() == t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GripAction {
    Open,
    Close,
}

impl GripAction {
    pub fn token(&self) -> &'static str {
        match self {
            GripAction::Open => "O",
            GripAction::Close => "C",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    Move {
        dir: Direction,
        speed: u8,
    },
    Stop,
    /// Gripper tip target in the arm frame, millimeters.
    ArmTo {
        x_mm: i32,
        y_mm: i32,
        z_mm: i32,
    },
    Grip(GripAction),
    Home,
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::Move { .. } => "MOV",
            Command::Stop => "STP",
            Command::ArmTo { .. } => "ARM",
            Command::Grip(_) => "GRP",
            Command::Home => "HOM",
        }
    }
}

impl fmt::Display for Command {
    /// Frame body without the checksum, e.g. `MOV F 200`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Move { dir, speed } => write!(f, "MOV {} {}", dir.token(), speed),
            Command::Stop => f.write_str("STP"),
            Command::ArmTo { x_mm, y_mm, z_mm } => write!(f, "ARM {x_mm} {y_mm} {z_mm}"),
            Command::Grip(a) => write!(f, "GRP {}", a.token()),
            Command::Home => f.write_str("HOM"),
        }
    }
}

/// Error code carried by an `ERR` acknowledgement, 1 to 99.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AckCode(u8);

impl AckCode {
    pub const MALFORMED: AckCode = AckCode(1);
    pub const BAD_CHECKSUM: AckCode = AckCode(2);
    pub const UNKNOWN_VERB: AckCode = AckCode(3);
    pub const OUT_OF_RANGE: AckCode = AckCode(4);
    pub const UNREACHABLE: AckCode = AckCode(5);
    /// The gripper closed without holding the object.
    pub const GRIP_FAILED: AckCode = AckCode(6);

    pub fn new(code: u8) -> Option<AckCode> {
        (1..=99).contains(&code).then_some(AckCode(code))
    }

    pub fn get(&self) -> u8 {
        self.0
    }
}

impl fmt::Display for AckCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match *self {
            AckCode::MALFORMED => "malformed",
            AckCode::BAD_CHECKSUM => "bad checksum",
            AckCode::UNKNOWN_VERB => "unknown verb",
            AckCode::OUT_OF_RANGE => "argument out of range",
            AckCode::UNREACHABLE => "unreachable target",
            AckCode::GRIP_FAILED => "grip failed",
            _ => "error",
        };
        write!(f, "{} ({name})", self.0)
    }
}

impl std::error::Error for AckCode {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ack {
    Ok,
    Err(AckCode),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("arm coordinate {0} mm outside +/-{MAX_ARM_MM}")]
    ArmOutOfRange(i32),
}
