// Copyright 2026 The altgrasp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `altgrasp`: generate grasp libraries, run the strategy comparison, replay
//! operator traces and host live sessions.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when a batch finished
//! with failed cases (the report is still written).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use altgrasp_core::geometry::{Pose, Vec3};
use altgrasp_core::grasp_selection::{generate_synthetic_library, GraspLibrary};
use altgrasp_core::scenario::{
    demo_home, demo_libraries, replay_trace_file, run_experiment, write_demo, Scenario,
    ScenarioConfig,
};
use altgrasp_core::shared_control::CalibrationFrame;
use altgrasp_core::RobotModel;
use altgrasp_service::{Session, SessionConfig};

#[derive(Debug, Parser)]
#[command(
    name = "altgrasp",
    version,
    about = "Alternating shared-control grasping simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic grasp library for one object.
    GenLibrary {
        #[arg(long)]
        object_id: String,
        /// Object center as `x,y,z` in meters.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        center: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 150)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the strategy comparison described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output_path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feed a recorded operator trace through the controller.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Host a live session over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Robot model JSON; defaults to the config's model or the built-in arm.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Grasp library JSON, repeatable; replaces the config's libraries.
        #[arg(long = "library")]
        libraries: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a ready-to-run demo scene (model, libraries, config, trace).
    InitDemo {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random preparation poses per object.
        #[arg(long, default_value_t = 50)]
        poses: usize,
    },
}

/// How a subcommand that ran to completion went.
enum Outcome {
    Done,
    CaseFailures,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CaseFailures) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::GenLibrary {
            object_id,
            center,
            radius,
            count,
            seed,
            out,
        } => {
            let [x, y, z] = center[..] else {
                bail!("--center takes exactly three values, got {}", center.len());
            };
            let center = Vec3::try_new(x, y, z).context("center must be finite")?;
            let library = generate_synthetic_library(
                object_id,
                &Pose::from_position(center),
                radius,
                count,
                seed,
            )?;
            write(&out, &library.to_json_pretty())?;
            Ok(Outcome::Done)
        }
        Command::Run { config, seed, out } => {
            let scenario = load_scenario(&config, seed)?;
            let dir = output_dir(&scenario, out);
            let report = run_experiment(&scenario);
            report.write_to_dir(&dir)?;
            for (strategy, agg) in &report.aggregate {
                println!(
                    "{:<20} cases {:>4}  failed {:>3}  path {:.4} m  rotation {:.4} rad  no-worse {:.3}",
                    strategy.as_str(),
                    agg.cases,
                    agg.failures,
                    agg.mean_path_length,
                    agg.mean_orientation_travel,
                    agg.no_worse_rate
                );
            }
            eprintln!("wrote {}", dir.display());
            Ok(if report.has_failures() {
                Outcome::CaseFailures
            } else {
                Outcome::Done
            })
        }
        Command::Replay {
            trace,
            config,
            seed,
            out,
        } => {
            let scenario = load_scenario(&config, seed)?;
            let dir = output_dir(&scenario, out);
            let output = replay_trace_file(&scenario, &trace)?;
            output.write_to_dir(&dir)?;
            eprintln!(
                "replayed {} samples into {}",
                output.log.len(),
                dir.display()
            );
            Ok(if output.report.has_failures() {
                Outcome::CaseFailures
            } else {
                Outcome::Done
            })
        }
        Command::Serve {
            port,
            model,
            libraries,
            config,
        } => {
            let session = build_session(model, libraries, config)?;
            serve(port, session)?;
            Ok(Outcome::Done)
        }
        Command::InitDemo { dir, seed, poses } => {
            if poses == 0 {
                bail!("--poses must be at least 1");
            }
            for path in write_demo(&dir, seed, poses)? {
                println!("{}", path.display());
            }
            Ok(Outcome::Done)
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(Scenario::load(config)?)
}

fn output_dir(scenario: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| scenario.config.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn build_session(
    model_path: Option<PathBuf>,
    library_paths: Vec<PathBuf>,
    config_path: Option<PathBuf>,
) -> Result<Session> {
    let config = config_path
        .map(|p| ScenarioConfig::from_path(&p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if let Some(c) = &config {
        c.validate()?;
    }

    let model = match (&model_path, &config) {
        (Some(path), _) => RobotModel::from_path(path)?,
        (None, Some(c)) => RobotModel::from_path(&c.robot_model_path)?,
        (None, None) => RobotModel::six_axis(),
    };
    let libraries = if !library_paths.is_empty() {
        load_libraries(&library_paths)?
    } else if let Some(c) = &config {
        load_libraries(&c.grasp_library_paths)?
    } else {
        demo_libraries(0)
    };

    let mut session_config = SessionConfig::default();
    let home = match &config {
        Some(c) => {
            session_config.shared_control = c.shared_control;
            session_config.selection = c.selection;
            session_config.calibration = CalibrationFrame::new(c.tracker_to_base);
            session_config.speed = c.speed;
            c.home_configuration.clone()
        }
        None => None,
    };
    let home = match home {
        Some(h) => h,
        None if model_path.is_none() && config.is_none() => demo_home(),
        None => model.mid_configuration(),
    };
    Ok(Session::new(model, libraries, home, session_config)?)
}

fn load_libraries(paths: &[PathBuf]) -> Result<Vec<GraspLibrary>> {
    paths
        .iter()
        .map(|p| GraspLibrary::from_path(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn serve(port: u16, session: Session) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on {}", listener.local_addr()?);
        let period = Duration::from_secs_f64(session.config().dt());
        altgrasp_service::serve(listener, session, period).await?;
        Ok(())
    })
}
