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

//! Automatic approach motion and the metrics used to compare strategies.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{linear_distance, rotation_angle_between, slerp, Pose, Vec3};

/// Angular rate (rad/s) used only when start and target share a position
/// and differ in orientation.
pub const ROTATION_ONLY_RATE: f64 = 0.5;

/// Default sample period, matching a 50 Hz control loop.
pub const DEFAULT_DT: f64 = 0.02;

/// Execution speed of the automatic approach (m/s).
pub const DEFAULT_SPEED: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    speed: f64,
    dt: f64,
}

impl Trajectory {
    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn final_pose(&self) -> Option<Pose> {
        self.samples.last().map(|s| s.pose)
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// CSV with header `t,px,py,pz,qw,qx,qy,qz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,px,py,pz,qw,qx,qy,qz\n");
        for s in &self.samples {
            let p = s.pose.position;
            let [qw, qx, qy, qz] = s.pose.orientation.to_array();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.t, p.x, p.y, p.z, qw, qx, qy, qz
            );
        }
        out
    }
}

/// Straight-line approach from `start` to `target` at constant `speed`, with
/// orientation SLERPed by the same path fraction. Samples are `dt` apart; the
/// last sample lands exactly on `target` at `distance / speed`.
pub fn plan_approach(
    start: &Pose,
    target: &Pose,
    speed: f64,
    dt: f64,
) -> Result<Trajectory, TrajectoryError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(TrajectoryError::InvalidInput(format!(
            "speed {speed} must be positive"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TrajectoryError::InvalidInput(format!(
            "dt {dt} must be positive"
        )));
    }
    let distance = linear_distance(&start.position, &target.position);
    let angle = rotation_angle_between(&start.orientation, &target.orientation);
    let duration = if distance > 0.0 {
        distance / speed
    } else {
        angle / ROTATION_ONLY_RATE
    };
    if duration == 0.0 {
        return Ok(Trajectory {
            samples: vec![TrajectorySample {
                t: 0.0,
                pose: *target,
            }],
            speed,
            dt,
        });
    }

    let mut samples = Vec::with_capacity((duration / dt).ceil() as usize + 1);
    let mut i = 0u64;
    loop {
        let t = i as f64 * dt;
        if t >= duration {
            break;
        }
        let fraction = t / duration;
        let orientation = slerp(&start.orientation, &target.orientation, fraction)
            .map_err(|e| TrajectoryError::InvalidInput(e.to_string()))?;
        samples.push(TrajectorySample {
            t,
            pose: Pose::new(start.position.lerp(&target.position, fraction), orientation),
        });
        i += 1;
    }
    samples.push(TrajectorySample {
        t: duration,
        pose: *target,
    });
    Ok(Trajectory { samples, speed, dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub path_length: f64,
    pub orientation_travel: f64,
    pub completion_time: f64,
    pub max_step_heading_change: f64,
}

/// Path length, orientation travel, completion time (last timestamp) and
/// the largest heading change between consecutive nonzero displacements.
pub fn compute_metrics(samples: &[TrajectorySample]) -> Result<MotionMetrics, TrajectoryError> {
    if samples.is_empty() {
        return Err(TrajectoryError::InvalidInput(
            "trajectory has no samples".into(),
        ));
    }
    let mut acc = MetricsAccumulator::default();
    for s in samples {
        acc.push(s.t, &s.pose);
    }
    Ok(acc.metrics())
}

/// Streaming form of [`compute_metrics`] for poses that arrive one at a time.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    metrics: MotionMetrics,
    previous: Option<Pose>,
    heading: Option<Vec3>,
}

impl MetricsAccumulator {
    pub fn push(&mut self, t: f64, pose: &Pose) {
        self.metrics.completion_time = t;
        if let Some(prev) = self.previous.replace(*pose) {
            let delta = pose.position - prev.position;
            self.metrics.path_length += delta.norm();
            self.metrics.orientation_travel +=
                rotation_angle_between(&prev.orientation, &pose.orientation);
            if let Some(heading) = delta.normalized() {
                if let Some(prev_heading) = self.heading {
                    let change = prev_heading
                        .cross(&heading)
                        .norm()
                        .atan2(prev_heading.dot(&heading));
                    self.metrics.max_step_heading_change =
                        self.metrics.max_step_heading_change.max(change);
                }
                self.heading = Some(heading);
            }
        }
    }

    pub fn metrics(&self) -> MotionMetrics {
        self.metrics
    }
}
