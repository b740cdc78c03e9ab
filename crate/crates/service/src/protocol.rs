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

//! JSON wire protocol.
//!
//! Every message, in both directions, is an envelope
//! `{"type": string, "seq": integer, "payload": object}`. All lengths are in
//! meters, angles in radians, quaternions `[w, x, y, z]`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use altgrasp_core::geometry::{Pose, UnitQuaternion, Vec3};
use altgrasp_core::grasp_selection::{GraspLibrary, StageEntry};
use altgrasp_core::kinematics::{JointConfiguration, RobotModel};
use altgrasp_core::shared_control::Mode;
use altgrasp_core::trajectory::MotionMetrics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("invalid payload for {kind}: {message}")]
    InvalidPayload { kind: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    #[serde(default = "empty_object")]
    pub payload: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl Envelope {
    pub fn new(kind: impl Into<String>, seq: u64, payload: impl Serialize) -> Self {
        Self {
            kind: kind.into(),
            seq,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandPosePayload {
    pub p: Vec3,
    pub q: UnitQuaternion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectObjectPayload {
    pub object_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfigPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_angular: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_linear: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

/// Operator input.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    HandPose(HandPosePayload),
    ToggleMode,
    Grip,
    SelectObject(SelectObjectPayload),
    SetConfig(SetConfigPayload),
    /// Request for the robot model and grasp libraries.
    ModelDescription,
    /// Take the operator role if nobody holds it.
    ClaimOperator,
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::HandPose(_) => "hand_pose",
            ClientMessage::ToggleMode => "toggle_mode",
            ClientMessage::Grip => "grip",
            ClientMessage::SelectObject(_) => "select_object",
            ClientMessage::SetConfig(_) => "set_config",
            ClientMessage::ModelDescription => "model_description",
            ClientMessage::ClaimOperator => "claim_operator",
        }
    }

    /// Messages that change the session and therefore need the operator role.
    pub fn is_control(&self) -> bool {
        !matches!(
            self,
            ClientMessage::ModelDescription | ClientMessage::ClaimOperator
        )
    }

    pub fn from_envelope(envelope: &Envelope) -> Result<Self, ProtocolError> {
        fn payload<T: serde::de::DeserializeOwned>(e: &Envelope) -> Result<T, ProtocolError> {
            serde_json::from_value(e.payload.clone()).map_err(|err| ProtocolError::InvalidPayload {
                kind: e.kind.clone(),
                message: err.to_string(),
            })
        }
        let msg = match envelope.kind.as_str() {
            "hand_pose" => ClientMessage::HandPose(payload(envelope)?),
            "toggle_mode" => payload::<Empty>(envelope).map(|_| ClientMessage::ToggleMode)?,
            "grip" => payload::<Empty>(envelope).map(|_| ClientMessage::Grip)?,
            "select_object" => ClientMessage::SelectObject(payload(envelope)?),
            "set_config" => ClientMessage::SetConfig(payload(envelope)?),
            "model_description" => {
                payload::<Empty>(envelope).map(|_| ClientMessage::ModelDescription)?
            }
            "claim_operator" => payload::<Empty>(envelope).map(|_| ClientMessage::ClaimOperator)?,
            other => return Err(ProtocolError::UnknownType(other.to_string())),
        };
        Ok(msg)
    }

    pub fn parse(text: &str) -> Result<(u64, Self), ProtocolError> {
        let envelope: Envelope =
            serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        Ok((envelope.seq, Self::from_envelope(&envelope)?))
    }

    pub fn to_envelope(&self, seq: u64) -> Envelope {
        match self {
            ClientMessage::HandPose(p) => Envelope::new(self.kind(), seq, p),
            ClientMessage::SelectObject(p) => Envelope::new(self.kind(), seq, p),
            ClientMessage::SetConfig(p) => Envelope::new(self.kind(), seq, p),
            _ => Envelope::new(self.kind(), seq, Empty {}),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedGrasp {
    pub object_id: String,
    pub candidate_id: u32,
    pub pose: Pose,
    pub m: f64,
}

/// What a grip would select for one object right now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPreview {
    pub object_id: String,
    pub chosen_id: Option<u32>,
    pub chosen_pose: Option<Pose>,
    pub m: Option<f64>,
    pub angular_stage: Vec<u32>,
    pub linear_stage: Vec<StageEntry>,
    pub discarded_ik_failures: Vec<u32>,
}

/// Complete render state of the session at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub mode: Mode,
    pub commanded_pose: Pose,
    pub joint_configuration: JointConfiguration,
    pub selected_object: Option<String>,
    pub selected_grasp: Option<SelectedGrasp>,
    pub pipeline_preview: Option<Vec<ObjectPreview>>,
    pub metrics_so_far: MotionMetrics,
    pub blending_active: bool,
    pub approach_active: bool,
}

impl StateSnapshot {
    pub fn to_envelope(&self) -> Envelope {
        Envelope::new("snapshot", self.tick, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    /// `seq` of the offending client message, when it could be read.
    pub in_reply_to: Option<u64>,
    pub message: String,
}

pub fn error_envelope(in_reply_to: Option<u64>, message: impl Into<String>) -> Envelope {
    Envelope::new(
        "error",
        in_reply_to.unwrap_or(0),
        ErrorPayload {
            in_reply_to,
            message: message.into(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptionPayload {
    pub model: RobotModel,
    pub libraries: Vec<GraspLibrary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Operator,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePayload {
    pub role: Role,
}
