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

//! Alternating manual/automatic control of the commanded end-effector pose.
//!
//! In manual mode the effector position follows the hand *relative* to a pair
//! of anchors, and the orientation follows the hand *absolutely* through the
//! tracker-to-base calibration rotation. Entering manual mode re-anchors both
//! positions at the current effector and hand so the position never jumps,
//! and the orientation is pulled toward the live hand orientation by repeated
//! SLERP until the residual falls below `blend_epsilon`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rotation_angle_between, slerp, Pose, UnitQuaternion, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Manual,
    Automatic,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("{operation} is not allowed in {mode:?} mode{detail}")]
    ModeViolation {
        operation: &'static str,
        mode: Mode,
        detail: &'static str,
    },
    #[error("hand sample step {got} does not follow step {last}")]
    OutOfOrderSample { last: u64, got: u64 },
    #[error("invalid shared-control config: {0}")]
    InvalidConfig(String),
}

fn violation(operation: &'static str, mode: Mode) -> ControlError {
    ControlError::ModeViolation {
        operation,
        mode,
        detail: "",
    }
}

/// Tracker reading in the tracker frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandSample {
    pub position: Vec3,
    pub orientation: UnitQuaternion,
    pub step_index: u64,
}

impl HandSample {
    pub fn new(position: Vec3, orientation: UnitQuaternion, step_index: u64) -> Self {
        Self {
            position,
            orientation,
            step_index,
        }
    }
}

/// Fixed rotation from the tracker frame to the robot base frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationFrame {
    pub rotation_tracker_to_base: UnitQuaternion,
}

impl CalibrationFrame {
    pub fn new(rotation_tracker_to_base: UnitQuaternion) -> Self {
        Self {
            rotation_tracker_to_base,
        }
    }
}

/// Effector position (base frame) and hand position (tracker frame) captured
/// at the most recent entry into manual mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAnchors {
    pub effector_anchor: Vec3,
    pub hand_anchor: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SharedControlConfig {
    /// SLERP parameter applied per sample while blending, in `(0, 1]`.
    pub alpha: f64,
    /// Residual angle (rad) below which blending ends.
    pub blend_epsilon: f64,
    pub sample_rate: f64,
}

impl Default for SharedControlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            blend_epsilon: 1e-3,
            sample_rate: 50.0,
        }
    }
}

impl SharedControlConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ControlError::InvalidConfig(format!(
                "alpha {} is outside (0, 1]",
                self.alpha
            )));
        }
        if !(self.blend_epsilon > 0.0 && self.blend_epsilon.is_finite()) {
            return Err(ControlError::InvalidConfig(format!(
                "blend_epsilon {} must be positive",
                self.blend_epsilon
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(ControlError::InvalidConfig(format!(
                "sample_rate {} must be positive",
                self.sample_rate
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// Result of one orientation blending step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendStep {
    pub orientation: UnitQuaternion,
    /// Angle left between the blended and the mapped orientation.
    pub residual: f64,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    pub mode: Mode,
    pub anchors: ControlAnchors,
    pub calibration: CalibrationFrame,
    pub last_commanded: Pose,
    pub blending_active: bool,
    pub last_step: Option<u64>,
}

impl ControlState {
    /// Manual following engaged at `hand`, starting from `initial`.
    pub fn engaged(initial: Pose, calibration: CalibrationFrame, hand: &HandSample) -> Self {
        Self {
            mode: Mode::Manual,
            anchors: ControlAnchors {
                effector_anchor: initial.position,
                hand_anchor: hand.position,
            },
            calibration,
            last_commanded: initial,
            blending_active: true,
            last_step: None,
        }
    }

    /// Holding `initial` in automatic mode with no hand engaged yet.
    pub fn holding(initial: Pose, calibration: CalibrationFrame) -> Self {
        Self {
            mode: Mode::Automatic,
            anchors: ControlAnchors {
                effector_anchor: initial.position,
                hand_anchor: Vec3::ZERO,
            },
            calibration,
            last_commanded: initial,
            blending_active: false,
            last_step: None,
        }
    }

    fn require(&self, mode: Mode, operation: &'static str) -> Result<(), ControlError> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(violation(operation, self.mode))
        }
    }

    /// Hand orientation expressed in the base frame.
    pub fn target_orientation(&self, hand: &HandSample) -> UnitQuaternion {
        self.calibration.rotation_tracker_to_base * hand.orientation
    }

    /// `effector_anchor + (hand - hand_anchor)`.
    pub fn map_position(&self, hand: &HandSample) -> Result<Vec3, ControlError> {
        self.require(Mode::Manual, "map_position")?;
        Ok(self.anchors.effector_anchor + (hand.position - self.anchors.hand_anchor))
    }

    pub fn map_orientation(&self, hand: &HandSample) -> Result<UnitQuaternion, ControlError> {
        self.require(Mode::Manual, "map_orientation")?;
        if self.blending_active {
            return Err(ControlError::ModeViolation {
                operation: "map_orientation",
                mode: self.mode,
                detail: " while blending is active",
            });
        }
        Ok(self.target_orientation(hand))
    }

    /// Re-anchors at the current commanded position and hand position, and
    /// starts orientation blending.
    pub fn switch_to_manual(&self, hand: &HandSample) -> Result<ControlState, ControlError> {
        self.require(Mode::Automatic, "switch_to_manual")?;
        Ok(ControlState {
            mode: Mode::Manual,
            anchors: ControlAnchors {
                effector_anchor: self.last_commanded.position,
                hand_anchor: hand.position,
            },
            blending_active: true,
            ..*self
        })
    }

    pub fn switch_to_automatic(&self) -> Result<ControlState, ControlError> {
        self.require(Mode::Manual, "switch_to_automatic")?;
        Ok(ControlState {
            mode: Mode::Automatic,
            blending_active: false,
            ..*self
        })
    }

    /// One SLERP step from the last commanded orientation toward the mapped
    /// hand orientation.
    pub fn blended_orientation_step(
        &self,
        hand: &HandSample,
        config: &SharedControlConfig,
    ) -> Result<BlendStep, ControlError> {
        self.require(Mode::Manual, "blended_orientation_step")?;
        if !self.blending_active {
            return Err(ControlError::ModeViolation {
                operation: "blended_orientation_step",
                mode: self.mode,
                detail: " without active blending",
            });
        }
        config.validate()?;
        let target = self.target_orientation(hand);
        let orientation = slerp(&self.last_commanded.orientation, &target, config.alpha)
            .map_err(|e| ControlError::InvalidConfig(e.to_string()))?;
        let residual = rotation_angle_between(&orientation, &target);
        Ok(BlendStep {
            orientation,
            residual,
            complete: residual < config.blend_epsilon,
        })
    }

    /// Advances one sample. In automatic mode the commanded pose is
    /// `automatic_pose` when given, otherwise the last commanded pose is held.
    pub fn step(
        &self,
        hand: &HandSample,
        config: &SharedControlConfig,
        automatic_pose: Option<Pose>,
    ) -> Result<(ControlState, Pose), ControlError> {
        if let Some(last) = self.last_step {
            if hand.step_index <= last {
                return Err(ControlError::OutOfOrderSample {
                    last,
                    got: hand.step_index,
                });
            }
        }
        let mut next = *self;
        next.last_step = Some(hand.step_index);
        let commanded = match self.mode {
            Mode::Automatic => automatic_pose.unwrap_or(self.last_commanded),
            Mode::Manual => {
                let position = self.map_position(hand)?;
                let orientation = if self.blending_active {
                    let blend = self.blended_orientation_step(hand, config)?;
                    next.blending_active = !blend.complete;
                    blend.orientation
                } else {
                    self.map_orientation(hand)?
                };
                Pose::new(position, orientation)
            }
        };
        next.last_commanded = commanded;
        Ok((next, commanded))
    }
}
