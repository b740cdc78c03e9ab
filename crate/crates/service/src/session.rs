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

//! The authoritative session state and its per-tick update.
//!
//! [`Session::tick`] is a pure function of the current state and the
//! messages applied in that tick, so a recorded message schedule replays to
//! an identical snapshot stream.

use std::sync::Arc;

use thiserror::Error;

use altgrasp_core::geometry::{
    linear_distance, rotation_angle_between, Pose, UnitQuaternion, Vec3,
};
use altgrasp_core::grasp_selection::{select_grasp, GraspLibrary, SelectionConfig, SelectionError};
use altgrasp_core::kinematics::{JointConfiguration, KinematicsError, RobotModel};
use altgrasp_core::scenario::nearest_library;
use altgrasp_core::shared_control::{
    CalibrationFrame, ControlError, ControlState, HandSample, Mode, SharedControlConfig,
};
use altgrasp_core::trajectory::{
    plan_approach, MetricsAccumulator, MotionMetrics, Trajectory, TrajectoryError, DEFAULT_SPEED,
};

use crate::protocol::{
    ClientMessage, HandPosePayload, ObjectPreview, SelectedGrasp, SetConfigPayload, StateSnapshot,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session setup: {0}")]
    InvalidSetup(String),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
    #[error("no hand pose received yet")]
    NoHandPose,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub shared_control: SharedControlConfig,
    pub selection: SelectionConfig,
    pub calibration: CalibrationFrame,
    /// Automatic approach speed (m/s).
    pub speed: f64,
    /// Recompute the selection preview at most every this many ticks.
    pub preview_interval: u64,
    /// Minimum effector translation (m) since the last preview.
    pub preview_min_translation: f64,
    /// Minimum effector rotation (rad) since the last preview.
    pub preview_min_rotation: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            shared_control: SharedControlConfig::default(),
            selection: SelectionConfig::default(),
            calibration: CalibrationFrame::default(),
            speed: DEFAULT_SPEED,
            preview_interval: 5,
            preview_min_translation: 1e-3,
            preview_min_rotation: 0.5f64.to_radians(),
        }
    }
}

impl SessionConfig {
    /// Seconds per tick.
    pub fn dt(&self) -> f64 {
        self.shared_control.dt()
    }
}

#[derive(Debug, Clone)]
struct Approach {
    trajectory: Trajectory,
    cursor: usize,
}

/// Output of one tick: the snapshot for all clients, plus per-message
/// errors addressed to whoever sent them (by index into the tick's input).
#[derive(Debug)]
pub struct TickOutput {
    pub snapshot: StateSnapshot,
    pub errors: Vec<(usize, SessionError)>,
}

#[derive(Debug, Clone)]
pub struct Session {
    model: Arc<RobotModel>,
    libraries: Arc<Vec<GraspLibrary>>,
    config: SessionConfig,
    tick: u64,
    control: ControlState,
    hand: Option<HandSample>,
    engaged: bool,
    joints: JointConfiguration,
    selected_object: Option<String>,
    selected_grasp: Option<SelectedGrasp>,
    approach: Option<Approach>,
    ignored_grips: u64,
    preview: Option<Vec<ObjectPreview>>,
    preview_anchor: Option<(u64, Pose)>,
    metrics: MetricsAccumulator,
    metrics_start: f64,
    // Metrics and IK only advance when the commanded pose changes.
    last_metric_pose: Pose,
}

impl Session {
    /// Starts in manual mode at `home`. Manual following engages with the
    /// first hand pose.
    pub fn new(
        model: RobotModel,
        libraries: Vec<GraspLibrary>,
        home: JointConfiguration,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        config
            .shared_control
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        config.selection.validate()?;
        if config.speed.is_nan() || config.speed <= 0.0 || config.preview_interval == 0 {
            return Err(SessionError::InvalidConfig(
                "speed and preview_interval must be positive".into(),
            ));
        }
        if libraries.is_empty() {
            return Err(SessionError::InvalidSetup("no grasp libraries".into()));
        }
        let initial = model.forward_kinematics(&home)?;
        let control = ControlState {
            mode: Mode::Manual,
            ..ControlState::holding(initial, config.calibration)
        };
        let mut metrics = MetricsAccumulator::default();
        metrics.push(0.0, &initial);
        Ok(Self {
            model: Arc::new(model),
            libraries: Arc::new(libraries),
            config,
            tick: 0,
            control,
            hand: None,
            engaged: false,
            joints: home,
            selected_object: None,
            selected_grasp: None,
            approach: None,
            ignored_grips: 0,
            preview: None,
            preview_anchor: None,
            metrics,
            metrics_start: 0.0,
            last_metric_pose: initial,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn libraries(&self) -> &[GraspLibrary] {
        &self.libraries
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn mode(&self) -> Mode {
        self.control.mode
    }

    /// Grips received in manual mode (recorded, otherwise ignored).
    pub fn ignored_grips(&self) -> u64 {
        self.ignored_grips
    }

    /// Snapshot of the current state without advancing.
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            tick: self.tick,
            mode: self.control.mode,
            commanded_pose: self.control.last_commanded,
            joint_configuration: self.joints.clone(),
            selected_object: self.selected_object.clone(),
            selected_grasp: self.selected_grasp.clone(),
            pipeline_preview: self.preview.clone(),
            metrics_so_far: self.metrics_since_reset(),
            blending_active: self.control.blending_active,
            approach_active: self.approach.is_some(),
        }
    }

    fn metrics_since_reset(&self) -> MotionMetrics {
        let mut m = self.metrics.metrics();
        m.completion_time -= self.metrics_start;
        m
    }

    /// Applies `messages` in order, advances one control step and returns the
    /// new snapshot. A message that fails validation leaves the state as it
    /// was and is reported in [`TickOutput::errors`].
    pub fn tick(&mut self, messages: &[ClientMessage]) -> TickOutput {
        let next_tick = self.tick + 1;
        let mut errors = Vec::new();
        for (i, msg) in messages.iter().enumerate() {
            if let Err(e) = self.apply(msg, next_tick) {
                errors.push((i, e));
            }
        }
        self.advance(next_tick);
        TickOutput {
            snapshot: self.snapshot(),
            errors,
        }
    }

    fn apply(&mut self, msg: &ClientMessage, step: u64) -> Result<(), SessionError> {
        match msg {
            ClientMessage::HandPose(HandPosePayload { p, q }) => {
                let hand = HandSample::new(*p, *q, step);
                if !self.engaged && self.control.mode == Mode::Manual {
                    let calibration = self.control.calibration;
                    self.control =
                        ControlState::engaged(self.control.last_commanded, calibration, &hand);
                    self.engaged = true;
                }
                self.hand = Some(hand);
            }
            ClientMessage::ToggleMode => match self.control.mode {
                Mode::Manual => {
                    self.control = self.control.switch_to_automatic()?;
                }
                Mode::Automatic => {
                    let hand = self.hand.ok_or(SessionError::NoHandPose)?;
                    self.control = self.control.switch_to_manual(&hand)?;
                    self.engaged = true;
                    self.approach = None;
                }
            },
            ClientMessage::Grip => match self.control.mode {
                Mode::Manual => self.ignored_grips += 1,
                Mode::Automatic => self.grip()?,
            },
            ClientMessage::SelectObject(p) => {
                if !self.libraries.iter().any(|l| l.object_id() == p.object_id) {
                    return Err(SessionError::UnknownObject(p.object_id.clone()));
                }
                self.selected_object = Some(p.object_id.clone());
            }
            ClientMessage::SetConfig(p) => self.set_config(p)?,
            ClientMessage::ModelDescription | ClientMessage::ClaimOperator => {}
        }
        Ok(())
    }

    fn set_config(&mut self, p: &SetConfigPayload) -> Result<(), SessionError> {
        let mut shared = self.config.shared_control;
        let mut selection = self.config.selection;
        if let Some(alpha) = p.alpha {
            shared.alpha = alpha;
        }
        if let Some(k) = p.k_angular {
            selection.k_angular = k;
        }
        if let Some(k) = p.k_linear {
            selection.k_linear = k;
        }
        shared
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        selection
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        self.config.shared_control = shared;
        self.config.selection = selection;
        self.preview_anchor = None;
        Ok(())
    }

    fn target_library(&self, position: &Vec3) -> &GraspLibrary {
        self.selected_object
            .as_deref()
            .and_then(|id| self.libraries.iter().find(|l| l.object_id() == id))
            .or_else(|| nearest_library(&self.libraries, position))
            .expect("session has libraries")
    }

    fn grip(&mut self) -> Result<(), SessionError> {
        let start = self.control.last_commanded;
        let library = self.target_library(&start.position);
        let report = select_grasp(
            library,
            &start,
            &self.model,
            &self.joints,
            &self.config.selection,
        )?;
        let trajectory = plan_approach(
            &start,
            &report.chosen.pose,
            self.config.speed,
            self.config.dt(),
        )?;
        self.selected_grasp = Some(SelectedGrasp {
            object_id: library.object_id().to_string(),
            candidate_id: report.chosen.id,
            pose: report.chosen.pose,
            m: report.chosen_score.m,
        });
        // The first trajectory sample is the current pose; the next tick
        // moves to the second one.
        self.approach = Some(Approach {
            trajectory,
            cursor: 1,
        });
        self.metrics = MetricsAccumulator::default();
        let now = self.tick as f64 * self.config.dt();
        self.metrics.push(now, &start);
        self.metrics_start = now;
        self.last_metric_pose = start;
        Ok(())
    }

    fn advance(&mut self, step: u64) {
        self.tick = step;
        let hand = self
            .hand
            .map(|h| HandSample {
                step_index: step,
                ..h
            })
            .unwrap_or_else(|| HandSample::new(Vec3::ZERO, UnitQuaternion::identity(), step));

        let commanded = match self.control.mode {
            Mode::Manual if !self.engaged => self.control.last_commanded,
            Mode::Manual => self.step_control(&hand, None),
            Mode::Automatic => {
                let target = self.approach.as_mut().map(|a| {
                    let samples = a.trajectory.samples();
                    let pose = samples[a.cursor.min(samples.len() - 1)].pose;
                    a.cursor += 1;
                    (pose, a.cursor >= samples.len())
                });
                if matches!(target, Some((_, true))) {
                    self.approach = None;
                }
                let target = target.map(|(pose, _)| pose);
                self.step_control(&hand, target)
            }
        };
        if commanded != self.last_metric_pose {
            if let Ok(solution) = self.model.solve_ik(&commanded, &self.joints) {
                self.joints = solution;
            }
            self.metrics
                .push(self.tick as f64 * self.config.dt(), &commanded);
            self.last_metric_pose = commanded;
        }
        self.refresh_preview();
    }

    fn step_control(&mut self, hand: &HandSample, target: Option<Pose>) -> Pose {
        // Step indices come from the tick counter, so ordering cannot fail;
        // fall back to holding the pose if it ever does.
        match self.control.step(hand, &self.config.shared_control, target) {
            Ok((next, pose)) => {
                self.control = next;
                pose
            }
            Err(_) => self.control.last_commanded,
        }
    }

    fn refresh_preview(&mut self) {
        if self.control.mode != Mode::Manual || !self.engaged {
            return;
        }
        let pose = self.control.last_commanded;
        if let Some((tick, anchor)) = self.preview_anchor {
            if self.tick < tick + self.config.preview_interval {
                return;
            }
            let moved = linear_distance(&pose.position, &anchor.position)
                > self.config.preview_min_translation;
            let turned = rotation_angle_between(&pose.orientation, &anchor.orientation)
                > self.config.preview_min_rotation;
            if !moved && !turned {
                return;
            }
        }
        self.preview_anchor = Some((self.tick, pose));
        let previews = self
            .libraries
            .iter()
            .map(|library| {
                match select_grasp(
                    library,
                    &pose,
                    &self.model,
                    &self.joints,
                    &self.config.selection,
                ) {
                    Ok(r) => ObjectPreview {
                        object_id: library.object_id().to_string(),
                        chosen_id: Some(r.chosen.id),
                        chosen_pose: Some(r.chosen.pose),
                        m: Some(r.chosen_score.m),
                        angular_stage: r.angular_stage.iter().map(|e| e.id).collect(),
                        linear_stage: r.linear_stage,
                        discarded_ik_failures: r.discarded_ik_failures,
                    },
                    Err(_) => ObjectPreview {
                        object_id: library.object_id().to_string(),
                        chosen_id: None,
                        chosen_pose: None,
                        m: None,
                        angular_stage: Vec::new(),
                        linear_stage: Vec::new(),
                        discarded_ik_failures: Vec::new(),
                    },
                }
            })
            .collect();
        self.preview = Some(previews);
    }
}
