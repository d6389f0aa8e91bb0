use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{decode, decode_ack, encode, Command, Direction, Frame, FrameSplitter, GripAction};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FuzzStats {
    pub inputs: u64,
    /// Lines that decoded to a command.
    pub accepted: u64,
    /// Rejections by error code.
    pub rejected: BTreeMap<u8, u64>,
    pub oversize: u64,
    /// Inputs that made the decoder panic. Must be zero.
    pub panics: u64,
}

const TOKENS: &[&str] = &[
    "MOV", "STP", "ARM", "GRP", "HOM", "OK", "ERR", "F", "B", "L", "R", "CW", "CC", "O", "C", " ",
    " ", "*", "\n", "-", "0", "1", "9", "00", "255", "256", "9999", "10000", "-0", "+1", "A", "ff",
];

pub fn random_command(rng: &mut ChaCha8Rng) -> Command {
    match rng.random_range(0..5) {
        0 => Command::Move {
            dir: *Direction::ALL.choose(rng).expect("non-empty"),
            speed: rng.random(),
        },
        1 => Command::Stop,
        2 => Command::ArmTo {
            x_mm: rng.random_range(-9999..=9999),
            y_mm: rng.random_range(-9999..=9999),
            z_mm: rng.random_range(-9999..=9999),
        },
        3 => Command::Grip(if rng.random() {
            GripAction::Open
        } else {
            GripAction::Close
        }),
        _ => Command::Home,
    }
}

fn random_input(rng: &mut ChaCha8Rng) -> Vec<u8> {
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(0..96);
            (0..n).map(|_| rng.random()).collect()
        }
        1 => {
            let mut bytes = encode(&random_command(rng)).expect("generator stays in range");
            for _ in 0..rng.random_range(1..4) {
                let i = rng.random_range(0..bytes.len());
                match rng.random_range(0..3) {
                    0 => bytes[i] ^= 1 << rng.random_range(0..8),
                    1 => bytes.insert(i, rng.random()),
                    _ => {
                        bytes.remove(i);
                        if bytes.is_empty() {
                            break;
                        }
                    }
                }
            }
            bytes
        }
        _ => {
            let n = rng.random_range(0..12);
            let mut s = String::new();
            for _ in 0..n {
                s.push_str(TOKENS.choose(rng).expect("non-empty"));
            }
            s.into_bytes()
        }
    }
}

fn exercise(input: &[u8], cut: usize, stats: &mut FuzzStats) {
    let mut splitter = FrameSplitter::new();
    let (a, b) = input.split_at(cut.min(input.len()));
    let mut frames = splitter.push(a);
    frames.extend(splitter.push(b));
    for f in frames {
        match f {
            Frame::Oversize => stats.oversize += 1,
            Frame::Line(line) => {
                match decode(&line) {
                    Ok(_) => stats.accepted += 1,
                    Err(code) => *stats.rejected.entry(code.get()).or_default() += 1,
                }
                let _ = decode_ack(&line);
            }
        }
    }
    // Raw input straight into the decoders too, newline or not.
    let _ = decode(input);
    let _ = decode_ack(input);
}

/// Feed `iterations` generated inputs through the splitter and both
/// decoders, counting outcomes and catching panics.
pub fn fuzz(iterations: u64, seed: u64) -> FuzzStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = FuzzStats::default();
    for _ in 0..iterations {
        let input = random_input(&mut rng);
        let cut = rng.random_range(0..=input.len());
        stats.inputs += 1;
        let mut local = FuzzStats::default();
        if catch_unwind(AssertUnwindSafe(|| exercise(&input, cut, &mut local))).is_err() {
            stats.panics += 1;
            continue;
        }
        stats.accepted += local.accepted;
        stats.oversize += local.oversize;
        for (k, v) in local.rejected {
            *stats.rejected.entry(k).or_default() += v;
        }
    }
    stats
}
