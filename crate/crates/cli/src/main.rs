//! `agdc`: run scenarios, replay detection logs, and check the arm and
//! wire protocol from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use agdc_core::kinematics::{forward_kinematics, inverse_kinematics, JointAngles, Point3};
use agdc_core::protocol::fuzz;
use agdc_core::report::{detection_log_jsonl, parse_detection_log, trajectory_csv};
use agdc_core::sim::{run_with, DetectionSource, RunOptions, RunOutput};
use agdc_core::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "agdc",
    version,
    about = "Garbage-collecting robot control stack and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the JSON report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-tick trajectory CSV here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Also record the detector frames as JSON lines here.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Solve inverse kinematics for an arm-frame target in cm.
    IkCheck {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        /// Take arm geometry and calibration from this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run a scenario with detections read from a log instead of the
    /// simulated detector.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Throw generated garbage at the protocol decoder.
    ProtoFuzz {
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(2)
    })
}

fn write_outputs(
    out: &RunOutput,
    report: Option<&Path>,
    trajectory: Option<&Path>,
    detections: Option<&Path>,
) -> anyhow::Result<()> {
    match report {
        Some(p) => write(p, &out.report.to_json())?,
        None => print!("{}", out.report.to_json()),
    }
    if let Some(p) = trajectory {
        write(p, &trajectory_csv(&out.trajectory))?;
    }
    if let Some(p) = detections {
        write(p, &detection_log_jsonl(&out.detections))?;
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<ExitCode, ExitCode> {
    let io_fail = |e: anyhow::Error| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    };
    match cmd {
        Cmd::Run {
            scenario,
            seed,
            out,
            trajectory,
            detections,
        } => {
            let cfg = load_scenario(&scenario)?;
            let result = run_with(&cfg, seed, RunOptions::default()).map_err(|e| {
                eprintln!("config error: {e}");
                ExitCode::from(2)
            })?;
            write_outputs(
                &result,
                Some(&out),
                trajectory.as_deref(),
                detections.as_deref(),
            )
            .map_err(io_fail)?;
            eprintln!(
                "picked {} in {:.2} s sim time, final state {}",
                result.report.picked, result.report.sim_duration_s, result.report.final_state
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::IkCheck { x, y, z, scenario } => {
            let cfg = match scenario {
                Some(p) => load_scenario(&p)?,
                None => ScenarioConfig::default(),
            };
            let (g, cal) = (cfg.arm.geometry, cfg.arm.calibration);
            let target = Point3::new(x, y, z);
            match inverse_kinematics(&g, &cal, target, &JointAngles::HOME) {
                Ok(q) => {
                    let residual = forward_kinematics(&g, &cal, &q).distance(&target);
                    println!("base_yaw   {:.6}", q.base_yaw);
                    println!("shoulder   {:.6}", q.shoulder);
                    println!("elbow      {:.6}", q.elbow);
                    println!("wrist_roll {:.6}", q.wrist_roll);
                    println!("residual_cm {residual:.3e}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Cmd::Replay {
            log,
            scenario,
            seed,
            out,
            trajectory,
        } => {
            let cfg = load_scenario(&scenario)?;
            let text = std::fs::read_to_string(&log).map_err(|e| {
                eprintln!("{}: {e}", log.display());
                ExitCode::from(2)
            })?;
            let records = parse_detection_log(&text).map_err(|e| {
                eprintln!("{}: {e}", log.display());
                ExitCode::from(2)
            })?;
            let opts = RunOptions {
                source: DetectionSource::Replay(records),
                ..RunOptions::default()
            };
            let result = run_with(&cfg, seed, opts).map_err(|e| {
                eprintln!("config error: {e}");
                ExitCode::from(2)
            })?;
            write_outputs(&result, out.as_deref(), trajectory.as_deref(), None).map_err(io_fail)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ProtoFuzz { iterations, seed } => {
            // Panics are caught and counted; keep the default hook quiet.
            std::panic::set_hook(Box::new(|_| {}));
            let stats = fuzz(iterations, seed);
            println!(
                "{}",
                serde_json::to_string_pretty(&stats).expect("stats serialize")
            );
            Ok(if stats.panics == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    run(cli.command).unwrap_or_else(|code| code)
}
