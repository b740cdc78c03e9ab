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

//! Serial revolute manipulators described by standard DH parameters.
//!
//! Provides forward kinematics, the geometric Jacobian, a damped-least-squares
//! IK solver, and the penalized manipulability `M = S * L` where `S` is the
//! Yoshikawa measure on the model's task rows and `L` is a product of
//! per-joint parabolic limit penalties.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix6, Matrix6xX, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rotation_angle_between, Pose, UnitQuaternion, Vec3};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("joint configuration has {got} angles, model has {expected} joints")]
    LengthMismatch { expected: usize, got: usize },
    #[error(
        "IK did not converge after {iterations} iterations \
         (position error {position_error:.3e} m, orientation error {orientation_error:.3e} rad)"
    )]
    IkFailure {
        iterations: usize,
        position_error: f64,
        orientation_error: f64,
    },
    #[error("failed to read robot model {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse robot model: {0}")]
    Parse(#[from] serde_json::Error),
}

impl KinematicsError {
    pub fn is_ik_failure(&self) -> bool {
        matches!(self, KinematicsError::IkFailure { .. })
    }
}

/// One revolute joint: standard DH link parameters plus limits (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhJoint {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
    pub min: f64,
    pub max: f64,
}

impl DhJoint {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64, min: f64, max: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
            min,
            max,
        }
    }

    /// Link transform `RotZ(theta) TransZ(d) TransX(a) RotX(alpha)`.
    fn transform(&self, angle: f64) -> Pose {
        let theta = angle + self.theta_offset;
        let (s, c) = theta.sin_cos();
        Pose::new(
            Vec3::new(self.a * c, self.a * s, self.d),
            UnitQuaternion::rot_z(theta) * UnitQuaternion::rot_x(self.alpha),
        )
    }
}

/// Jacobian rows that enter the singularity measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskRows {
    /// Linear and angular velocity (6 rows).
    #[default]
    Full,
    /// Linear velocity only (3 rows).
    Position,
    /// Linear x and y velocity (2 rows), for planar arms.
    PlanarPosition,
}

impl TaskRows {
    fn rows(self) -> &'static [usize] {
        match self {
            TaskRows::Full => &[0, 1, 2, 3, 4, 5],
            TaskRows::Position => &[0, 1, 2],
            TaskRows::PlanarPosition => &[0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotModelFile {
    joints: Vec<DhJoint>,
    #[serde(default)]
    base: Pose,
    #[serde(default)]
    tool: Pose,
    #[serde(default)]
    task_rows: TaskRows,
}

/// Immutable serial-chain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RobotModelFile", into = "RobotModelFile")]
pub struct RobotModel {
    joints: Vec<DhJoint>,
    base: Pose,
    tool: Pose,
    task_rows: TaskRows,
}

impl TryFrom<RobotModelFile> for RobotModel {
    type Error = KinematicsError;

    fn try_from(file: RobotModelFile) -> Result<Self, Self::Error> {
        RobotModel::new(file.joints, file.base, file.tool, file.task_rows)
    }
}

impl From<RobotModel> for RobotModelFile {
    fn from(model: RobotModel) -> Self {
        RobotModelFile {
            joints: model.joints,
            base: model.base,
            tool: model.tool,
            task_rows: model.task_rows,
        }
    }
}

impl RobotModel {
    pub fn new(
        joints: Vec<DhJoint>,
        base: Pose,
        tool: Pose,
        task_rows: TaskRows,
    ) -> Result<Self, KinematicsError> {
        if joints.len() < 2 {
            return Err(KinematicsError::InvalidModel(format!(
                "need at least 2 joints, got {}",
                joints.len()
            )));
        }
        for (i, j) in joints.iter().enumerate() {
            let params = [j.a, j.alpha, j.d, j.theta_offset, j.min, j.max];
            if params.iter().any(|v| !v.is_finite()) {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint {i} has non-finite parameters"
                )));
            }
            if j.min >= j.max {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint {i} limits [{}, {}] are empty",
                    j.min, j.max
                )));
            }
        }
        if !base.position.is_finite() || !tool.position.is_finite() {
            return Err(KinematicsError::InvalidModel(
                "base or tool position is not finite".into(),
            ));
        }
        let rows = task_rows.rows().len();
        if rows > joints.len() {
            return Err(KinematicsError::InvalidModel(format!(
                "{rows} task rows exceed {} joints",
                joints.len()
            )));
        }
        Ok(Self {
            joints,
            base,
            tool,
            task_rows,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, KinematicsError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, KinematicsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| KinematicsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot model serializes")
    }

    /// Two unit links on parallel z axes, limits of +/- pi, planar task rows.
    pub fn planar_2r() -> Self {
        use std::f64::consts::PI;
        let link = DhJoint::new(1.0, 0.0, 0.0, 0.0, -PI, PI);
        Self::new(
            vec![link, link],
            Pose::identity(),
            Pose::identity(),
            TaskRows::PlanarPosition,
        )
        .expect("valid built-in model")
    }

    /// Six-axis arm with UR5 link geometry, a 0.1 m tool offset, and limits of
    /// +/- pi on every joint. The base is turned half a revolution so the arm
    /// reaches toward +x at zero shoulder pan.
    pub fn six_axis() -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        let params = [
            (0.0, FRAC_PI_2, 0.089159),
            (-0.425, 0.0, 0.0),
            (-0.39225, 0.0, 0.0),
            (0.0, FRAC_PI_2, 0.10915),
            (0.0, -FRAC_PI_2, 0.09465),
            (0.0, 0.0, 0.0823),
        ];
        let joints = params
            .iter()
            .map(|&(a, alpha, d)| DhJoint::new(a, alpha, d, 0.0, -PI, PI))
            .collect();
        Self::new(
            joints,
            Pose::new(Vec3::ZERO, UnitQuaternion::rot_z(PI)),
            Pose::from_position(Vec3::new(0.0, 0.0, 0.1)),
            TaskRows::Full,
        )
        .expect("valid built-in model")
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[DhJoint] {
        &self.joints
    }

    pub fn base(&self) -> &Pose {
        &self.base
    }

    pub fn tool(&self) -> &Pose {
        &self.tool
    }

    pub fn task_rows(&self) -> TaskRows {
        self.task_rows
    }

    /// Joint-range midpoints.
    pub fn mid_configuration(&self) -> JointConfiguration {
        JointConfiguration::new(self.joints.iter().map(|j| 0.5 * (j.min + j.max)).collect())
    }

    fn check(&self, theta: &JointConfiguration) -> Result<(), KinematicsError> {
        if theta.len() != self.dof() {
            return Err(KinematicsError::LengthMismatch {
                expected: self.dof(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Returns the frame preceding each joint (joint `i` rotates about its z
    /// axis) followed by the flange frame, all in world coordinates.
    fn joint_frames(&self, theta: &JointConfiguration) -> Vec<Pose> {
        let mut frames = Vec::with_capacity(self.dof() + 1);
        let mut frame = self.base;
        frames.push(frame);
        for (joint, &angle) in self.joints.iter().zip(theta.angles()) {
            frame = frame.compose(&joint.transform(angle));
            frames.push(frame);
        }
        frames
    }

    /// End-effector (tool) pose in the world frame.
    pub fn forward_kinematics(&self, theta: &JointConfiguration) -> Result<Pose, KinematicsError> {
        self.check(theta)?;
        let frames = self.joint_frames(theta);
        Ok(frames[self.dof()].compose(&self.tool))
    }

    /// Geometric Jacobian; rows are `(vx, vy, vz, wx, wy, wz)`.
    pub fn jacobian(&self, theta: &JointConfiguration) -> Result<Matrix6xX<f64>, KinematicsError> {
        self.check(theta)?;
        let frames = self.joint_frames(theta);
        let tip = frames[self.dof()].compose(&self.tool).position;
        let mut jac = Matrix6xX::zeros(self.dof());
        for (i, frame) in frames.iter().take(self.dof()).enumerate() {
            let axis = frame.orientation.axis_z();
            let linear = axis.cross(&(tip - frame.position));
            jac.column_mut(i)
                .copy_from_slice(&[linear.x, linear.y, linear.z, axis.x, axis.y, axis.z]);
        }
        Ok(jac)
    }

    /// Yoshikawa manipulability `sqrt(det(J J^T))` over the task rows,
    /// evaluated as the product of the task Jacobian's singular values.
    pub fn singularity_term(&self, theta: &JointConfiguration) -> Result<f64, KinematicsError> {
        let jac = self.jacobian(theta)?;
        let rows = self.task_rows.rows();
        let task = DMatrix::from_fn(rows.len(), self.dof(), |r, c| jac[(rows[r], c)]);
        Ok(task.singular_values().iter().product())
    }

    /// Product over joints of `4 (q - min)(max - q) / (max - min)^2`, each
    /// factor clamped to `[0, 1]`.
    pub fn joint_limit_term(&self, theta: &JointConfiguration) -> Result<f64, KinematicsError> {
        self.check(theta)?;
        Ok(self
            .joints
            .iter()
            .zip(theta.angles())
            .map(|(j, &q)| {
                let range = j.max - j.min;
                (4.0 * (q - j.min) * (j.max - q) / (range * range)).clamp(0.0, 1.0)
            })
            .product())
    }

    pub fn penalized_manipulability(
        &self,
        theta: &JointConfiguration,
    ) -> Result<ManipulabilityScore, KinematicsError> {
        let s = self.singularity_term(theta)?;
        let l = self.joint_limit_term(theta)?;
        Ok(ManipulabilityScore::new(s, l))
    }

    pub fn clamp_to_limits(&self, theta: &mut JointConfiguration) {
        for (q, j) in theta.0.iter_mut().zip(&self.joints) {
            *q = q.clamp(j.min, j.max);
        }
    }

    /// Damped-least-squares IK from `seed` with default settings.
    pub fn solve_ik(
        &self,
        target: &Pose,
        seed: &JointConfiguration,
    ) -> Result<JointConfiguration, KinematicsError> {
        self.solve_ik_with(target, seed, &IkConfig::default())
    }

    pub fn solve_ik_with(
        &self,
        target: &Pose,
        seed: &JointConfiguration,
        config: &IkConfig,
    ) -> Result<JointConfiguration, KinematicsError> {
        self.check(seed)?;
        let mut theta = seed.clone();
        let damping = Matrix6::identity() * (config.damping * config.damping);
        let mut iterations = 0;
        loop {
            let pose = self.forward_kinematics(&theta)?;
            let position_error = target.position - pose.position;
            let orientation_error = rotation_angle_between(&pose.orientation, &target.orientation);
            if position_error.norm() <= config.position_tolerance
                && orientation_error <= config.orientation_tolerance
            {
                return Ok(theta);
            }
            if iterations == config.max_iterations {
                return Err(KinematicsError::IkFailure {
                    iterations,
                    position_error: position_error.norm(),
                    orientation_error,
                });
            }
            iterations += 1;

            let rot = (target.orientation * pose.orientation.inverse()).to_rotation_vector();
            let err = Vector6::new(
                position_error.x,
                position_error.y,
                position_error.z,
                rot.x,
                rot.y,
                rot.z,
            );
            let jac = self.jacobian(&theta)?;
            let gram = &jac * jac.transpose() + damping;
            let Some(y) = gram.cholesky().map(|c| c.solve(&err)) else {
                return Err(KinematicsError::IkFailure {
                    iterations,
                    position_error: position_error.norm(),
                    orientation_error,
                });
            };
            let step = jac.transpose() * y;
            for (q, dq) in theta.0.iter_mut().zip(step.iter()) {
                *q += dq.clamp(-config.max_step, config.max_step);
            }
            self.clamp_to_limits(&mut theta);
        }
    }
}

/// DLS solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkConfig {
    pub damping: f64,
    /// Per-joint step clamp (rad per iteration).
    pub max_step: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_step: 0.2,
            max_iterations: 200,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
        }
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfiguration(Vec<f64>);

impl JointConfiguration {
    pub fn new(angles: Vec<f64>) -> Self {
        Self(angles)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for JointConfiguration {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for JointConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// `m = s * l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulabilityScore {
    pub s: f64,
    pub l: f64,
    pub m: f64,
}

impl ManipulabilityScore {
    pub fn new(s: f64, l: f64) -> Self {
        Self { s, l, m: s * l }
    }
}
