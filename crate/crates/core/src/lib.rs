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

//! Alternating shared-control teleoperation for object grasping.
//!
//! The operator drives a simulated arm by hand motion (manual mode) and hands
//! over to automation (automatic mode), which picks a grasp pose that is
//! close to what the operator was already doing and comfortable for the arm,
//! then approaches it along a straight line.
//!
//! * [`geometry`]: vectors, unit quaternions, SLERP and the ranking distances.
//! * [`kinematics`]: DH serial chains, Jacobian, DLS IK, penalized manipulability.
//! * [`shared_control`]: the manual/automatic state machine.
//! * [`grasp_selection`]: the three-stage grasp selection and the
//!   manipulability-only baseline.
//! * [`trajectory`]: approach planning and motion metrics.
//! * [`scenario`]: batch experiments, trace replay and the demo scene.

pub mod geometry;
pub mod grasp_selection;
pub mod kinematics;
pub mod scenario;
pub mod shared_control;
pub mod trajectory;

pub use geometry::{Pose, UnitQuaternion, Vec3};
pub use grasp_selection::{GraspCandidate, GraspLibrary, SelectionConfig, SelectionReport};
pub use kinematics::{JointConfiguration, ManipulabilityScore, RobotModel};
pub use shared_control::{ControlState, HandSample, Mode, SharedControlConfig};
pub use trajectory::{MotionMetrics, Trajectory};
