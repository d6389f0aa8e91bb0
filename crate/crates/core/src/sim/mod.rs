//! Kinematic world simulator and the closed-loop scenario runner.

mod actuator;
mod world;

pub use actuator::{
    advance, apply_command, resolve_pick, tip_world, ActuatorModel, Effect, MissReason,
    PickOutcome, RobotModel, BIN_TOLERANCE, PICK_TOLERANCE,
};
pub use world::{
    project_ground, render_detections, ArmMotion, DetectorOracle, ObjectStatus, Pose, WorldObject,
    WorldState,
};

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mission::{Detection, Phase, StepInput};
use crate::protocol::{Ack, AckCode, Command, DirectLink, Link, Loopback, WireLink};
use crate::report::{Attempt, AttemptOutcome, DetectionRecord, Report, TrajectoryRow};
use crate::scenario::{ConfigError, ScenarioConfig};

/// Stream labels. Every consumer of randomness draws from its own stream
/// of the run seed.
pub mod streams {
    pub const DETECTOR: u64 = 1;
    pub const DOWNLINK: u64 = 2;
    pub const UPLINK: u64 = 3;
}

pub fn rng_stream(seed: u64, label: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

// Tolerance when comparing tick times with frame times.
const TIME_EPS: f64 = 1e-9;

/// Attempts over one link before giving up on a garbled transmission.
const MAX_TRANSMISSIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    /// Encode, chunk, reassemble and decode every message.
    #[default]
    Wire,
    /// Pass commands and acks through as values.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum DetectionSource {
    #[default]
    Oracle,
    /// Frames from a log; each tick consumes every record due by then and
    /// uses the latest.
    Replay(Vec<DetectionRecord>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub transport: Transport,
    pub source: DetectionSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub trajectory: Vec<TrajectoryRow>,
    /// Frames the mission saw, in log format.
    pub detections: Vec<DetectionRecord>,
    pub world: WorldState,
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput, ConfigError> {
    run_with(cfg, seed, RunOptions::default())
}

struct Counters {
    commands_sent: u64,
    link_errors: u64,
}

fn transmit(link: &mut dyn Link, c: &Command, n: &mut Counters) -> Result<Command, AckCode> {
    let mut tries = 0;
    loop {
        tries += 1;
        match link.send_command(c) {
            Ok(received) => return Ok(received),
            Err(code) => {
                n.link_errors += 1;
                let retry = matches!(code, AckCode::MALFORMED | AckCode::BAD_CHECKSUM);
                if !retry || tries >= MAX_TRANSMISSIONS {
                    return Err(code);
                }
            }
        }
    }
}

/// Send an ack back to the planner. Any error makes the planner re-plan,
/// so whatever it still had queued is dropped.
fn deliver(
    link: &mut dyn Link,
    c: Command,
    a: Ack,
    queue: &mut VecDeque<Command>,
    acks: &mut Vec<(Command, Ack)>,
    n: &mut Counters,
) {
    let received = link.send_ack(&a).unwrap_or_else(|code| {
        n.link_errors += 1;
        Ack::Err(code)
    });
    if let Ack::Err(_) = received {
        queue.clear();
    }
    acks.push((c, received));
}

fn is_arm_command(c: &Command) -> bool {
    matches!(c, Command::ArmTo { .. } | Command::Grip(_) | Command::Home)
}

fn objects_column(w: &WorldState) -> String {
    w.objects.iter().map(|o| o.status.letter()).collect()
}

/// Run a scenario to completion or to its time budget.
///
/// Each control tick: render a detector frame when one is due, step the
/// mission, advance any arm motion, then send queued commands over the
/// link and apply them, one arm command at a time.
pub fn run_with(
    cfg: &ScenarioConfig,
    seed: u64,
    opts: RunOptions,
) -> Result<RunOutput, ConfigError> {
    cfg.validate()?;
    let camera = cfg.camera_model();
    let planner = cfg.planner();
    let robot = cfg.robot_model();
    let mut world = cfg.initial_world();
    let mut det_rng = rng_stream(seed, streams::DETECTOR);
    let mut link: Box<dyn Link> = match opts.transport {
        Transport::Wire => Box::new(WireLink::new(
            Loopback::new(
                cfg.link.max_chunk,
                cfg.link.corruption_rate,
                rng_stream(seed, streams::DOWNLINK),
            ),
            Loopback::new(
                cfg.link.max_chunk,
                cfg.link.corruption_rate,
                rng_stream(seed, streams::UPLINK),
            ),
        )),
        Transport::Direct => Box::new(DirectLink),
    };

    let dt = cfg.mission.control_period;
    let period = cfg.mission.detection_period;
    let mut state = planner.initial_state();
    let mut queue: VecDeque<Command> = VecDeque::new();
    let mut inflight: Option<Command> = None;
    let mut acks: Vec<(Command, Ack)> = Vec::new();
    let mut counters = Counters {
        commands_sent: 0,
        link_errors: 0,
    };
    let mut attempts = Vec::new();
    let mut picked = 0u32;
    let mut last_target = [0i32; 3];
    let mut trajectory = Vec::new();
    let mut log = Vec::new();
    let mut next_frame: u64 = 0;
    let mut cursor = 0usize;
    let mut tick: u64 = 0;

    loop {
        let t = tick as f64 * dt;
        if state.phase == Phase::Done || t >= cfg.time_budget - TIME_EPS {
            break;
        }
        world.time = t;

        let frame: Option<Vec<Detection>> = match &opts.source {
            DetectionSource::Oracle => {
                if t + TIME_EPS >= next_frame as f64 * period {
                    while next_frame as f64 * period <= t + TIME_EPS {
                        next_frame += 1;
                    }
                    Some(render_detections(
                        &world,
                        &camera,
                        &cfg.detector,
                        &mut det_rng,
                    ))
                } else {
                    None
                }
            }
            DetectionSource::Replay(records) => {
                let mut latest = None;
                while cursor < records.len() && records[cursor].t <= t + TIME_EPS {
                    latest = Some(cursor);
                    cursor += 1;
                }
                latest.map(|i| records[i].detections.clone())
            }
        };
        if let Some(dets) = &frame {
            log.push(DetectionRecord {
                t,
                detections: dets.clone(),
            });
        }

        let (next, cmds) = planner.step(
            &state,
            &StepInput {
                clock: t,
                detections: frame.as_deref(),
                acks: &acks,
            },
        );
        state = next;
        acks.clear();
        queue.extend(cmds);

        // Arm time for this tick goes to the motion already running.
        let mut arm_busy = false;
        if let Some(c) = inflight {
            arm_busy = true;
            if let Some(a) = advance(&mut world, &robot, dt) {
                inflight = None;
                deliver(link.as_mut(), c, a, &mut queue, &mut acks, &mut counters);
            }
        }

        let mut last_command = String::new();
        while inflight.is_none() {
            let Some(&c) = queue.front() else { break };
            if arm_busy && is_arm_command(&c) {
                break;
            }
            queue.pop_front();
            counters.commands_sent += 1;
            last_command = c.to_string();
            let received = match transmit(link.as_mut(), &c, &mut counters) {
                Ok(r) => r,
                Err(code) => {
                    deliver(
                        link.as_mut(),
                        c,
                        Ack::Err(code),
                        &mut queue,
                        &mut acks,
                        &mut counters,
                    );
                    continue;
                }
            };
            if let Command::ArmTo { x_mm, y_mm, z_mm } = received {
                last_target = [x_mm, y_mm, z_mm];
            }
            let effect = apply_command(&mut world, &robot, &received, dt);
            if let Some(outcome) = effect.pick {
                let (outcome, miss_reason) = match outcome {
                    PickOutcome::Success(_) => {
                        picked += 1;
                        (AttemptOutcome::Picked, None)
                    }
                    PickOutcome::Miss(r) => (AttemptOutcome::Missed, Some(r)),
                };
                attempts.push(Attempt {
                    time_s: t,
                    target_mm: last_target,
                    outcome,
                    miss_reason,
                });
            }
            if matches!(received, Command::ArmTo { .. })
                && effect.ack == Some(Ack::Err(AckCode::UNREACHABLE))
                && world.holding.is_none()
            {
                attempts.push(Attempt {
                    time_s: t,
                    target_mm: last_target,
                    outcome: AttemptOutcome::Unreachable,
                    miss_reason: None,
                });
            }
            match effect.ack {
                Some(a) => deliver(link.as_mut(), c, a, &mut queue, &mut acks, &mut counters),
                None => inflight = Some(c),
            }
        }

        tick += 1;
        trajectory.push(TrajectoryRow {
            time: tick as f64 * dt,
            x: world.robot.x,
            y: world.robot.y,
            heading: world.robot.heading,
            phase: state.phase,
            last_command,
            objects: objects_column(&world),
        });
    }

    world.time = tick as f64 * dt;
    let report = Report {
        seed,
        picked,
        binned: world.bin_fill,
        attempts,
        sim_duration_s: world.time,
        ticks: tick,
        detection_frames: log.len() as u64,
        commands_sent: counters.commands_sent,
        link_errors: counters.link_errors,
        final_state: state.phase,
        config: cfg.clone(),
    };
    Ok(RunOutput {
        report,
        trajectory,
        detections: log,
        world,
    })
}
