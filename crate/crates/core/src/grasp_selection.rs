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

//! Preference-aware grasp selection.
//!
//! Candidates are narrowed in two stages around the operator's current
//! end-effector pose: first the `k_angular` closest in orientation (quaternion
//! chord distance), then among those the `k_linear` closest in position. Each
//! finalist is solved with IK from the robot's current configuration and the
//! one with the highest penalized manipulability wins. Ties fall back to the
//! smaller linear distance and then the smaller id, so selection is a total
//! order and fully deterministic.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_chord_distance, linear_distance, Pose, UnitQuaternion, Vec3};
use crate::kinematics::{
    IkConfig, JointConfiguration, KinematicsError, ManipulabilityScore, RobotModel,
};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(
        "no feasible grasp for object {object_id}: all {attempted} evaluated candidates failed IK"
    )]
    NoFeasibleGrasp { object_id: String, attempted: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("failed to read grasp library {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse grasp library: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub id: u32,
    pub object_id: String,
    #[serde(flatten)]
    pub pose: Pose,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateRecord {
    id: u32,
    p: Vec3,
    q: UnitQuaternion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    object_id: String,
    candidates: Vec<CandidateRecord>,
}

/// Stored grasp poses for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LibraryFile", into = "LibraryFile")]
pub struct GraspLibrary {
    object_id: String,
    candidates: Vec<GraspCandidate>,
}

impl TryFrom<LibraryFile> for GraspLibrary {
    type Error = SelectionError;

    fn try_from(file: LibraryFile) -> Result<Self, Self::Error> {
        let candidates = file
            .candidates
            .into_iter()
            .map(|c| GraspCandidate {
                id: c.id,
                object_id: file.object_id.clone(),
                pose: Pose::new(c.p, c.q),
            })
            .collect();
        GraspLibrary::new(file.object_id, candidates)
    }
}

impl From<GraspLibrary> for LibraryFile {
    fn from(lib: GraspLibrary) -> Self {
        LibraryFile {
            object_id: lib.object_id,
            candidates: lib
                .candidates
                .into_iter()
                .map(|c| CandidateRecord {
                    id: c.id,
                    p: c.pose.position,
                    q: c.pose.orientation,
                })
                .collect(),
        }
    }
}

impl GraspLibrary {
    /// Validates that the library is non-empty, ids are unique, and every
    /// candidate belongs to `object_id`.
    pub fn new(
        object_id: impl Into<String>,
        candidates: Vec<GraspCandidate>,
    ) -> Result<Self, SelectionError> {
        let object_id = object_id.into();
        if candidates.is_empty() {
            return Err(SelectionError::InvalidInput(format!(
                "grasp library for {object_id} is empty"
            )));
        }
        let mut seen = HashSet::new();
        for c in &candidates {
            if !seen.insert(c.id) {
                return Err(SelectionError::InvalidInput(format!(
                    "duplicate candidate id {} in library {object_id}",
                    c.id
                )));
            }
            if c.object_id != object_id {
                return Err(SelectionError::InvalidInput(format!(
                    "candidate {} belongs to {}, not {object_id}",
                    c.id, c.object_id
                )));
            }
            if !c.pose.position.is_finite() {
                return Err(SelectionError::InvalidInput(format!(
                    "candidate {} has a non-finite position",
                    c.id
                )));
            }
        }
        Ok(Self {
            object_id,
            candidates,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, SelectionError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SelectionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SelectionError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("grasp library serializes")
    }

    pub fn object_id(&self) -> &str {
        &self.object_id
    }

    pub fn candidates(&self) -> &[GraspCandidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&GraspCandidate> {
        self.candidates.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub k_angular: usize,
    pub k_linear: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k_angular: 30,
            k_linear: 6,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.k_angular == 0 || self.k_linear == 0 {
            return Err(SelectionError::InvalidInput(
                "k_angular and k_linear must be positive".into(),
            ));
        }
        if self.k_linear > self.k_angular {
            return Err(SelectionError::InvalidInput(format!(
                "k_linear {} exceeds k_angular {}",
                self.k_linear, self.k_angular
            )));
        }
        Ok(())
    }
}

/// A candidate id with the distance it was ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub id: u32,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalistScore {
    pub id: u32,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub chosen: GraspCandidate,
    pub chosen_joint_solution: JointConfiguration,
    pub chosen_score: ManipulabilityScore,
    /// Orientation-stage survivors, ascending chord distance.
    pub angular_stage: Vec<StageEntry>,
    /// Position-stage survivors, ascending linear distance.
    pub linear_stage: Vec<StageEntry>,
    /// Penalized manipulability of every finalist that passed IK, in
    /// linear-stage order.
    pub finalist_scores: Vec<FinalistScore>,
    pub discarded_ik_failures: Vec<u32>,
}

impl SelectionReport {
    pub fn chosen_linear_distance(&self) -> Option<f64> {
        self.linear_stage
            .iter()
            .find(|e| e.id == self.chosen.id)
            .map(|e| e.distance)
    }
}

fn rank_by(
    candidates: &[GraspCandidate],
    k: usize,
    distance: impl Fn(&GraspCandidate) -> f64,
) -> Result<Vec<(&GraspCandidate, f64)>, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::InvalidInput("no candidates to rank".into()));
    }
    if k == 0 {
        return Err(SelectionError::InvalidInput("k must be at least 1".into()));
    }
    let mut ranked: Vec<_> = candidates.iter().map(|c| (c, distance(c))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)));
    ranked.truncate(k);
    Ok(ranked)
}

/// The `k` candidates closest to `q_ee` by chord distance, ascending, ties by id.
pub fn filter_top_k_angular<'a>(
    candidates: &'a [GraspCandidate],
    q_ee: &UnitQuaternion,
    k: usize,
) -> Result<Vec<(&'a GraspCandidate, f64)>, SelectionError> {
    rank_by(candidates, k, |c| {
        angular_chord_distance(q_ee, &c.pose.orientation)
    })
}

/// The `k` candidates closest to `p_ee`, ascending, ties by id.
pub fn filter_top_k_linear<'a>(
    candidates: &'a [GraspCandidate],
    p_ee: &Vec3,
    k: usize,
) -> Result<Vec<(&'a GraspCandidate, f64)>, SelectionError> {
    rank_by(candidates, k, |c| linear_distance(p_ee, &c.pose.position))
}

struct Evaluated<'a> {
    candidate: &'a GraspCandidate,
    linear_distance: f64,
    solution: JointConfiguration,
    score: ManipulabilityScore,
}

/// Higher M first, then smaller linear distance, then smaller id.
fn better(a: &Evaluated<'_>, b: &Evaluated<'_>) -> Ordering {
    b.score
        .m
        .total_cmp(&a.score.m)
        .then(a.linear_distance.total_cmp(&b.linear_distance))
        .then(a.candidate.id.cmp(&b.candidate.id))
}

fn evaluate_and_choose<'a>(
    object_id: &str,
    finalists: &[(&'a GraspCandidate, f64)],
    model: &RobotModel,
    theta_seed: &JointConfiguration,
    ik: &IkConfig,
) -> Result<(Evaluated<'a>, Vec<FinalistScore>, Vec<u32>), SelectionError> {
    let mut feasible = Vec::with_capacity(finalists.len());
    let mut discarded = Vec::new();
    for &(candidate, linear_distance) in finalists {
        match model.solve_ik_with(&candidate.pose, theta_seed, ik) {
            Ok(solution) => {
                let score = model.penalized_manipulability(&solution)?;
                feasible.push(Evaluated {
                    candidate,
                    linear_distance,
                    solution,
                    score,
                });
            }
            Err(e) if e.is_ik_failure() => discarded.push(candidate.id),
            Err(e) => return Err(e.into()),
        }
    }
    let scores = feasible
        .iter()
        .map(|e| FinalistScore {
            id: e.candidate.id,
            m: e.score.m,
        })
        .collect();
    let best =
        feasible
            .into_iter()
            .min_by(better)
            .ok_or_else(|| SelectionError::NoFeasibleGrasp {
                object_id: object_id.to_string(),
                attempted: finalists.len(),
            })?;
    Ok((best, scores, discarded))
}

fn stage(entries: &[(&GraspCandidate, f64)]) -> Vec<StageEntry> {
    entries
        .iter()
        .map(|&(c, distance)| StageEntry { id: c.id, distance })
        .collect()
}

/// Orientation filter, then position filter, then argmax of penalized
/// manipulability over the IK-feasible finalists.
pub fn select_grasp(
    library: &GraspLibrary,
    ee_pose: &Pose,
    model: &RobotModel,
    theta_seed: &JointConfiguration,
    config: &SelectionConfig,
) -> Result<SelectionReport, SelectionError> {
    select_grasp_with(
        library,
        ee_pose,
        model,
        theta_seed,
        config,
        &IkConfig::default(),
    )
}

pub fn select_grasp_with(
    library: &GraspLibrary,
    ee_pose: &Pose,
    model: &RobotModel,
    theta_seed: &JointConfiguration,
    config: &SelectionConfig,
    ik: &IkConfig,
) -> Result<SelectionReport, SelectionError> {
    config.validate()?;
    if theta_seed.len() != model.dof() {
        return Err(KinematicsError::LengthMismatch {
            expected: model.dof(),
            got: theta_seed.len(),
        }
        .into());
    }
    let angular =
        filter_top_k_angular(library.candidates(), &ee_pose.orientation, config.k_angular)?;
    let survivors: Vec<GraspCandidate> = angular.iter().map(|(c, _)| (*c).clone()).collect();
    let linear = filter_top_k_linear(&survivors, &ee_pose.position, config.k_linear)?;
    let (best, finalist_scores, discarded_ik_failures) =
        evaluate_and_choose(library.object_id(), &linear, model, theta_seed, ik)?;
    Ok(SelectionReport {
        chosen: best.candidate.clone(),
        chosen_joint_solution: best.solution,
        chosen_score: best.score,
        angular_stage: stage(&angular),
        linear_stage: stage(&linear),
        finalist_scores,
        discarded_ik_failures,
    })
}

/// Global argmax of penalized manipulability over the whole library,
/// ignoring the operator's pose. Stage lists are full-library scans ranked
/// against the pose at `theta_seed`.
pub fn select_grasp_baseline(
    library: &GraspLibrary,
    model: &RobotModel,
    theta_seed: &JointConfiguration,
) -> Result<SelectionReport, SelectionError> {
    select_grasp_baseline_with(library, model, theta_seed, &IkConfig::default())
}

pub fn select_grasp_baseline_with(
    library: &GraspLibrary,
    model: &RobotModel,
    theta_seed: &JointConfiguration,
    ik: &IkConfig,
) -> Result<SelectionReport, SelectionError> {
    let current = model.forward_kinematics(theta_seed)?;
    let all = library.len();
    let angular = filter_top_k_angular(library.candidates(), &current.orientation, all)?;
    let linear = filter_top_k_linear(library.candidates(), &current.position, all)?;
    let (best, finalist_scores, discarded_ik_failures) =
        evaluate_and_choose(library.object_id(), &linear, model, theta_seed, ik)?;
    Ok(SelectionReport {
        chosen: best.candidate.clone(),
        chosen_joint_solution: best.solution,
        chosen_score: best.score,
        angular_stage: stage(&angular),
        linear_stage: stage(&linear),
        finalist_scores,
        discarded_ik_failures,
    })
}

/// Seeded grasp poses on a sphere of `radius` around `object_pose`, each
/// with its tool z-axis (approach direction) pointing at the object center
/// and a random roll about that axis.
///
/// Approach directions are drawn uniformly from the part of the sphere whose
/// object-frame z component is at least -0.2, leaving out grasps from
/// underneath the object.
pub fn generate_synthetic_library(
    object_id: impl Into<String>,
    object_pose: &Pose,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<GraspLibrary, SelectionError> {
    if count == 0 {
        return Err(SelectionError::InvalidInput(
            "count must be at least 1".into(),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SelectionError::InvalidInput(format!(
            "radius {radius} must be positive"
        )));
    }
    if !object_pose.position.is_finite() {
        return Err(SelectionError::InvalidInput(
            "object position is not finite".into(),
        ));
    }
    let object_id = object_id.into();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = Vec::with_capacity(count);
    while candidates.len() < count {
        let z: f64 = rng.random_range(-0.2..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let roll: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).max(0.0).sqrt();
        let dir = Vec3::new(r * phi.cos(), r * phi.sin(), z);
        let local = Pose::new(dir * radius, approach_orientation(-dir, roll));
        candidates.push(GraspCandidate {
            id: candidates.len() as u32,
            object_id: object_id.clone(),
            pose: object_pose.compose(&local),
        });
    }
    GraspLibrary::new(object_id, candidates)
}

/// Orientation whose z-axis is `approach` (unit length), rolled by `roll`
/// about it.
pub fn approach_orientation(approach: Vec3, roll: f64) -> UnitQuaternion {
    let reference = if approach.x.abs() < 0.9 {
        Vec3::X
    } else {
        Vec3::Y
    };
    let y0 = approach.cross(&reference).normalized().unwrap_or(Vec3::Y);
    let x0 = y0.cross(&approach);
    let (s, c) = roll.sin_cos();
    let x = x0 * c + y0 * s;
    let y = approach.cross(&x);
    UnitQuaternion::from_basis(x, y, approach).unwrap_or_default()
}
