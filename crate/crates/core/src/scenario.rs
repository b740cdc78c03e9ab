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

//! Batch experiments comparing grasp selection strategies, trace replay, and
//! a built-in demo scene.
//!
//! An experiment places the simulated effector at each preparation pose (as
//! if the operator had driven it there), runs each strategy's selection for
//! each object, plans the automatic approach and records its metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{linear_distance, Pose, UnitQuaternion, Vec3};
use crate::grasp_selection::{
    approach_orientation, generate_synthetic_library, select_grasp, select_grasp_baseline,
    GraspLibrary, SelectionConfig, SelectionError, SelectionReport,
};
use crate::kinematics::{JointConfiguration, KinematicsError, ManipulabilityScore, RobotModel};
use crate::shared_control::{
    CalibrationFrame, ControlError, ControlState, HandSample, Mode, SharedControlConfig,
};
use crate::trajectory::{
    compute_metrics, plan_approach, MotionMetrics, Trajectory, TrajectoryError, DEFAULT_DT,
    DEFAULT_SPEED,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },
    #[error("trace line {line}: {source}")]
    TraceEvent { line: usize, source: ControlError },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Orientation filter, position filter, then manipulability.
    PreferenceAware,
    /// Manipulability over the whole library.
    ManipulabilityOnly,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::PreferenceAware => "preference_aware",
            Strategy::ManipulabilityOnly => "manipulability_only",
        }
    }
}

/// Seeded preparation poses generated around each object: the simulated
/// operator approaches from a random direction, stops `standoff` beyond the
/// grasp sphere, and points the tool roughly at the object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomPreparation {
    pub count: usize,
    pub standoff_min: f64,
    pub standoff_max: f64,
    /// Maximum tilt (rad) of the tool axis away from the object center.
    pub orientation_noise: f64,
    /// Resampling budget per pose when the arm cannot reach a sample.
    pub max_attempts: usize,
}

impl Default for RandomPreparation {
    fn default() -> Self {
        Self {
            count: 50,
            standoff_min: 0.05,
            standoff_max: 0.15,
            orientation_noise: 0.25,
            max_attempts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreparationPoses {
    /// The same explicit poses are used for every object.
    Poses(Vec<Pose>),
    /// Poses generated per object.
    Random(RandomPreparation),
}

fn default_speed() -> f64 {
    DEFAULT_SPEED
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::PreferenceAware, Strategy::ManipulabilityOnly]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub robot_model_path: PathBuf,
    pub grasp_library_paths: Vec<PathBuf>,
    pub preparation_poses: PreparationPoses,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub shared_control: SharedControlConfig,
    #[serde(default)]
    pub tracker_to_base: UnitQuaternion,
    /// Robot configuration before the operator starts; defaults to the
    /// joint-range midpoints.
    #[serde(default)]
    pub home_configuration: Option<JointConfiguration>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = read(path)?;
        let mut config: ScenarioConfig =
            serde_json::from_str(&text).map_err(|source| ScenarioError::ConfigParse {
                path: path.to_path_buf(),
                source,
            })?;
        let dir = path.parent().unwrap_or_else(|| Path::new(""));
        config.robot_model_path = dir.join(&config.robot_model_path);
        for p in &mut config.grasp_library_paths {
            *p = dir.join(&*p);
        }
        if let Some(out) = &mut config.output_path {
            *out = dir.join(&*out);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.strategies.is_empty() {
            return Err(ScenarioError::InvalidConfig(
                "no strategies configured".into(),
            ));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(ScenarioError::InvalidConfig(format!(
                "speed {} must be positive",
                self.speed
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ScenarioError::InvalidConfig(format!(
                "dt {} must be positive",
                self.dt
            )));
        }
        if self.grasp_library_paths.is_empty() {
            return Err(ScenarioError::InvalidConfig(
                "no grasp libraries configured".into(),
            ));
        }
        match &self.preparation_poses {
            PreparationPoses::Poses(p) if p.is_empty() => {
                return Err(ScenarioError::InvalidConfig("no preparation poses".into()))
            }
            PreparationPoses::Random(r) => {
                if r.count == 0 {
                    return Err(ScenarioError::InvalidConfig(
                        "random preparation count must be positive".into(),
                    ));
                }
                if !(r.standoff_min >= 0.0 && r.standoff_min <= r.standoff_max) {
                    return Err(ScenarioError::InvalidConfig(
                        "standoff range must satisfy 0 <= min <= max".into(),
                    ));
                }
            }
            _ => {}
        }
        self.selection.validate()?;
        self.shared_control.validate()?;
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A validated config together with the model and libraries it references.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: RobotModel,
    pub libraries: Vec<GraspLibrary>,
}

impl Scenario {
    pub fn load(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        config.validate()?;
        let model = RobotModel::from_path(&config.robot_model_path)?;
        let libraries = config
            .grasp_library_paths
            .iter()
            .map(GraspLibrary::from_path)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(config, model, libraries)
    }

    pub fn new(
        config: ScenarioConfig,
        model: RobotModel,
        libraries: Vec<GraspLibrary>,
    ) -> Result<Self, ScenarioError> {
        config.validate()?;
        if libraries.is_empty() {
            return Err(ScenarioError::InvalidConfig("no grasp libraries".into()));
        }
        if let Some(home) = &config.home_configuration {
            if home.len() != model.dof() {
                return Err(ScenarioError::InvalidConfig(format!(
                    "home configuration has {} angles, model has {} joints",
                    home.len(),
                    model.dof()
                )));
            }
        }
        let mut ids: Vec<&str> = libraries.iter().map(|l| l.object_id()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScenarioError::InvalidConfig("duplicate object ids".into()));
        }
        Ok(Self {
            config,
            model,
            libraries,
        })
    }

    pub fn home(&self) -> JointConfiguration {
        self.config
            .home_configuration
            .clone()
            .unwrap_or_else(|| self.model.mid_configuration())
    }

    pub fn calibration(&self) -> CalibrationFrame {
        CalibrationFrame::new(self.config.tracker_to_base)
    }
}

/// Least-squares intersection of the candidates' approach axes, and the mean
/// candidate distance from it.
pub fn estimate_object_center(library: &GraspLibrary) -> (Vec3, f64) {
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    let mut centroid = Vec3::ZERO;
    for c in library.candidates() {
        let z = c.pose.orientation.axis_z();
        let z = Vector3::new(z.x, z.y, z.z);
        let p = c.pose.position;
        let proj = Matrix3::identity() - z * z.transpose();
        a += proj;
        b += proj * Vector3::new(p.x, p.y, p.z);
        centroid += p;
    }
    let n = library.len() as f64;
    let center = match a.try_inverse() {
        Some(inv) if library.len() > 1 => {
            let c = inv * b;
            Vec3::new(c.x, c.y, c.z)
        }
        _ => centroid * (1.0 / n),
    };
    let radius = library
        .candidates()
        .iter()
        .map(|c| linear_distance(&c.pose.position, &center))
        .sum::<f64>()
        / n;
    (center, radius)
}

/// A preparation pose with the joint configuration that realizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preparation {
    pub pose: Pose,
    pub configuration: Option<JointConfiguration>,
}

/// Preparation poses per object, in library order.
pub fn preparation_poses(scenario: &Scenario) -> Vec<Vec<Preparation>> {
    let home = scenario.home();
    let model = &scenario.model;
    let reach = |pose: &Pose| model.solve_ik(pose, &home).ok();
    match &scenario.config.preparation_poses {
        PreparationPoses::Poses(poses) => {
            let preps: Vec<Preparation> = poses
                .iter()
                .map(|pose| Preparation {
                    pose: *pose,
                    configuration: reach(pose),
                })
                .collect();
            vec![preps; scenario.libraries.len()]
        }
        PreparationPoses::Random(params) => scenario
            .libraries
            .iter()
            .enumerate()
            .map(|(index, library)| {
                let (center, radius) = estimate_object_center(library);
                let seed = scenario
                    .config
                    .seed
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(index as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..params.count)
                    .map(|_| {
                        let mut last = None;
                        for _ in 0..params.max_attempts.max(1) {
                            let pose = sample_preparation(&mut rng, center, radius, params);
                            if let Some(configuration) = reach(&pose) {
                                return Preparation {
                                    pose,
                                    configuration: Some(configuration),
                                };
                            }
                            last = Some(pose);
                        }
                        Preparation {
                            pose: last.expect("at least one attempt"),
                            configuration: None,
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

fn sample_preparation(
    rng: &mut ChaCha8Rng,
    center: Vec3,
    radius: f64,
    params: &RandomPreparation,
) -> Pose {
    let z: f64 = rng.random_range(-0.2..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let roll: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let standoff = if params.standoff_max > params.standoff_min {
        rng.random_range(params.standoff_min..=params.standoff_max)
    } else {
        params.standoff_min
    };
    let r = (1.0 - z * z).max(0.0).sqrt();
    let dir = Vec3::new(r * phi.cos(), r * phi.sin(), z);
    let aim = approach_orientation(-dir, roll);
    let tilt_axis_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let tilt: f64 = rng.random_range(0.0..=params.orientation_noise);
    let axis = Vec3::new(tilt_axis_angle.cos(), tilt_axis_angle.sin(), 0.0);
    let tilted = aim * UnitQuaternion::from_rotation_vector(axis * tilt);
    Pose::new(center + dir * (radius + standoff), tilted)
}

/// Condensed selection outcome stored in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub chosen_id: u32,
    pub chosen_pose: Pose,
    pub joint_solution: JointConfiguration,
    pub score: ManipulabilityScore,
    pub angular_stage_size: usize,
    pub linear_stage_size: usize,
    pub chosen_linear_distance: Option<f64>,
    pub discarded_ik_failures: Vec<u32>,
}

impl From<&SelectionReport> for SelectionSummary {
    fn from(r: &SelectionReport) -> Self {
        Self {
            chosen_id: r.chosen.id,
            chosen_pose: r.chosen.pose,
            joint_solution: r.chosen_joint_solution.clone(),
            score: r.chosen_score,
            angular_stage_size: r.angular_stage.len(),
            linear_stage_size: r.linear_stage.len(),
            chosen_linear_distance: r.chosen_linear_distance(),
            discarded_ik_failures: r.discarded_ik_failures.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CaseOutcome {
    Ok {
        selection: SelectionSummary,
        metrics: MotionMetrics,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub preparation_index: usize,
    pub object_id: String,
    pub strategy: Strategy,
    pub preparation_pose: Pose,
    #[serde(flatten)]
    pub outcome: CaseOutcome,
}

impl CaseReport {
    pub fn metrics(&self) -> Option<&MotionMetrics> {
        match &self.outcome {
            CaseOutcome::Ok { metrics, .. } => Some(metrics),
            CaseOutcome::Failed { .. } => None,
        }
    }

    pub fn selection(&self) -> Option<&SelectionSummary> {
        match &self.outcome {
            CaseOutcome::Ok { selection, .. } => Some(selection),
            CaseOutcome::Failed { .. } => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self.outcome, CaseOutcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub cases: usize,
    pub failures: usize,
    pub mean_path_length: f64,
    pub mean_orientation_travel: f64,
    pub mean_completion_time: f64,
    pub mean_max_step_heading_change: f64,
    /// Share of paired cases where this strategy's path is strictly shorter
    /// than every other strategy's.
    pub win_rate: f64,
    /// Share of paired cases where this strategy's path is no longer than any
    /// other strategy's.
    pub no_worse_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub speed: f64,
    pub dt: f64,
    pub cases: Vec<CaseReport>,
    pub aggregate: BTreeMap<Strategy, StrategyAggregate>,
}

impl ExperimentReport {
    pub fn from_cases(seed: u64, speed: f64, dt: f64, cases: Vec<CaseReport>) -> Self {
        let aggregate = aggregate(&cases);
        Self {
            seed,
            speed,
            dt,
            cases,
            aggregate,
        }
    }

    pub fn has_failures(&self) -> bool {
        self.cases.iter().any(CaseReport::is_failure)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per case.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "preparation,object_id,strategy,status,chosen_id,m,path_length,orientation_travel,completion_time,max_step_heading_change\n",
        );
        for c in &self.cases {
            let _ = match &c.outcome {
                CaseOutcome::Ok { selection, metrics } => writeln!(
                    out,
                    "{},{},{},ok,{},{},{},{},{},{}",
                    c.preparation_index,
                    c.object_id,
                    c.strategy.as_str(),
                    selection.chosen_id,
                    selection.score.m,
                    metrics.path_length,
                    metrics.orientation_travel,
                    metrics.completion_time,
                    metrics.max_step_heading_change
                ),
                CaseOutcome::Failed { .. } => writeln!(
                    out,
                    "{},{},{},failed,,,,,,",
                    c.preparation_index,
                    c.object_id,
                    c.strategy.as_str()
                ),
            };
        }
        out
    }

    /// Writes `report.json` and `summary.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), ScenarioError> {
        write_file(&dir.join("report.json"), &self.to_json())?;
        write_file(&dir.join("summary.csv"), &self.to_csv())
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| ScenarioError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn aggregate(cases: &[CaseReport]) -> BTreeMap<Strategy, StrategyAggregate> {
    let mut out: BTreeMap<Strategy, StrategyAggregate> = BTreeMap::new();
    let mut sums: BTreeMap<Strategy, [f64; 4]> = BTreeMap::new();
    for c in cases {
        let agg = out.entry(c.strategy).or_default();
        agg.cases += 1;
        match c.metrics() {
            Some(m) => {
                let s = sums.entry(c.strategy).or_default();
                s[0] += m.path_length;
                s[1] += m.orientation_travel;
                s[2] += m.completion_time;
                s[3] += m.max_step_heading_change;
            }
            None => agg.failures += 1,
        }
    }
    for (strategy, agg) in out.iter_mut() {
        let ok = (agg.cases - agg.failures) as f64;
        if ok > 0.0 {
            let s = sums[strategy];
            agg.mean_path_length = s[0] / ok;
            agg.mean_orientation_travel = s[1] / ok;
            agg.mean_completion_time = s[2] / ok;
            agg.mean_max_step_heading_change = s[3] / ok;
        }
    }

    // Pair cases by (preparation, object) for win rates.
    let mut paired: BTreeMap<(usize, &str), Vec<(Strategy, f64)>> = BTreeMap::new();
    for c in cases {
        if let Some(m) = c.metrics() {
            paired
                .entry((c.preparation_index, c.object_id.as_str()))
                .or_default()
                .push((c.strategy, m.path_length));
        }
    }
    let strategies: Vec<Strategy> = out.keys().copied().collect();
    if strategies.len() > 1 {
        for strategy in strategies {
            let mut total = 0usize;
            let mut wins = 0usize;
            let mut no_worse = 0usize;
            for entries in paired.values() {
                if entries.len() != out.len() {
                    continue;
                }
                let Some(&(_, mine)) = entries.iter().find(|(s, _)| *s == strategy) else {
                    continue;
                };
                total += 1;
                let others = entries.iter().filter(|(s, _)| *s != strategy);
                if others.clone().all(|&(_, l)| mine < l) {
                    wins += 1;
                }
                if others.clone().all(|&(_, l)| mine <= l) {
                    no_worse += 1;
                }
            }
            if total > 0 {
                let agg = out.get_mut(&strategy).expect("strategy present");
                agg.win_rate = wins as f64 / total as f64;
                agg.no_worse_rate = no_worse as f64 / total as f64;
            }
        }
    }
    out
}

/// Full outcome of one case, including the complete selection report and
/// the planned approach.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub selection: SelectionReport,
    pub trajectory: Trajectory,
    pub metrics: MotionMetrics,
}

/// Runs one strategy for one object from a preparation pose.
pub fn run_case(
    scenario: &Scenario,
    library: &GraspLibrary,
    preparation: &Preparation,
    strategy: Strategy,
) -> Result<CaseRun, ScenarioError> {
    let configuration = preparation.configuration.as_ref().ok_or_else(|| {
        ScenarioError::InvalidConfig(format!(
            "preparation pose at {} is not reachable",
            preparation.pose.position
        ))
    })?;
    let selection = match strategy {
        Strategy::PreferenceAware => select_grasp(
            library,
            &preparation.pose,
            &scenario.model,
            configuration,
            &scenario.config.selection,
        )?,
        Strategy::ManipulabilityOnly => {
            select_grasp_baseline(library, &scenario.model, configuration)?
        }
    };
    let trajectory = plan_approach(
        &preparation.pose,
        &selection.chosen.pose,
        scenario.config.speed,
        scenario.config.dt,
    )?;
    let metrics = compute_metrics(trajectory.samples())?;
    Ok(CaseRun {
        selection,
        trajectory,
        metrics,
    })
}

/// Every (preparation pose, object, strategy) combination, in that nesting
/// order. Cases run in parallel; failures are recorded per case.
pub fn run_experiment(scenario: &Scenario) -> ExperimentReport {
    let preparations = preparation_poses(scenario);
    let strategies = &scenario.config.strategies;
    let mut jobs = Vec::new();
    let count = preparations.first().map_or(0, Vec::len);
    #[allow(clippy::needless_range_loop)]
    for index in 0..count {
        for (object, library) in scenario.libraries.iter().enumerate() {
            for &strategy in strategies {
                jobs.push((index, library, &preparations[object][index], strategy));
            }
        }
    }
    let cases = jobs
        .into_par_iter()
        .map(|(index, library, preparation, strategy)| {
            let outcome = match run_case(scenario, library, preparation, strategy) {
                Ok(run) => CaseOutcome::Ok {
                    selection: SelectionSummary::from(&run.selection),
                    metrics: run.metrics,
                },
                Err(e) => CaseOutcome::Failed {
                    error: e.to_string(),
                },
            };
            CaseReport {
                preparation_index: index,
                object_id: library.object_id().to_string(),
                strategy,
                preparation_pose: preparation.pose,
                outcome,
            }
        })
        .collect();
    ExperimentReport::from_cases(
        scenario.config.seed,
        scenario.config.speed,
        scenario.config.dt,
        cases,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    ToManual,
    ToAutomatic,
    Grip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHand {
    pub p: Vec3,
    pub q: UnitQuaternion,
}

/// One line of a JSON-lines trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub step: u64,
    pub t: f64,
    pub hand: TraceHand,
    pub event: Option<TraceEvent>,
}

impl TraceRecord {
    pub fn hand_sample(&self) -> HandSample {
        HandSample::new(self.hand.p, self.hand.q, self.step)
    }
}

/// Parses a JSON-lines trace; blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, ScenarioError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ScenarioError::TraceParse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn trace_to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandLogEntry {
    pub step: u64,
    pub t: f64,
    pub mode: Mode,
    pub blending: bool,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub log: Vec<CommandLogEntry>,
    pub report: ExperimentReport,
}

impl ReplayOutput {
    /// CSV with header `step,t,mode,blending,px,py,pz,qw,qx,qy,qz`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("step,t,mode,blending,px,py,pz,qw,qx,qy,qz\n");
        for e in &self.log {
            let p = e.pose.position;
            let [qw, qx, qy, qz] = e.pose.orientation.to_array();
            let mode = match e.mode {
                Mode::Manual => "manual",
                Mode::Automatic => "automatic",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.step, e.t, mode, e.blending, p.x, p.y, p.z, qw, qx, qy, qz
            );
        }
        out
    }

    /// Writes `commanded_poses.csv`, `report.json` and `summary.csv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), ScenarioError> {
        write_file(&dir.join("commanded_poses.csv"), &self.log_csv())?;
        self.report.write_to_dir(dir)
    }
}

/// The library whose nearest candidate is closest to `position`.
pub fn nearest_library<'a>(
    libraries: &'a [GraspLibrary],
    position: &Vec3,
) -> Option<&'a GraspLibrary> {
    libraries
        .iter()
        .map(|lib| {
            let d = lib
                .candidates()
                .iter()
                .map(|c| linear_distance(&c.pose.position, position))
                .fold(f64::INFINITY, f64::min);
            (lib, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(lib, _)| lib)
}

/// Feeds a trace through the shared-control state machine. Manual following
/// starts at the first record. A `grip` in automatic mode selects a grasp on
/// the object nearest to the effector and follows the planned approach one
/// sample per record; `grip` in manual mode is ignored.
pub fn replay_trace(
    scenario: &Scenario,
    records: &[TraceRecord],
) -> Result<ReplayOutput, ScenarioError> {
    let config = &scenario.config;
    let model = &scenario.model;
    let mut joints = scenario.home();
    let Some(first) = records.first() else {
        return Ok(ReplayOutput {
            log: Vec::new(),
            report: ExperimentReport::from_cases(config.seed, config.speed, config.dt, Vec::new()),
        });
    };
    let initial = model.forward_kinematics(&joints)?;
    let mut state = ControlState::engaged(initial, scenario.calibration(), &first.hand_sample());
    let mut approach: Option<(Trajectory, usize)> = None;
    let mut log = Vec::with_capacity(records.len());
    let mut cases = Vec::new();

    for (i, record) in records.iter().enumerate() {
        let line = i + 1;
        let hand = record.hand_sample();
        let event_err = |source| ScenarioError::TraceEvent { line, source };
        match record.event {
            Some(TraceEvent::ToManual) => {
                state = state.switch_to_manual(&hand).map_err(event_err)?;
                approach = None;
            }
            Some(TraceEvent::ToAutomatic) => {
                state = state.switch_to_automatic().map_err(event_err)?;
            }
            Some(TraceEvent::Grip) if state.mode == Mode::Automatic => {
                let current = state.last_commanded;
                let library = nearest_library(&scenario.libraries, &current.position)
                    .expect("scenario has libraries");
                let preparation = Preparation {
                    pose: current,
                    configuration: Some(joints.clone()),
                };
                let outcome =
                    match run_case(scenario, library, &preparation, Strategy::PreferenceAware) {
                        Ok(run) => {
                            let summary = SelectionSummary::from(&run.selection);
                            let metrics = run.metrics;
                            approach = Some((run.trajectory, 0));
                            CaseOutcome::Ok {
                                selection: summary,
                                metrics,
                            }
                        }
                        Err(e) => CaseOutcome::Failed {
                            error: e.to_string(),
                        },
                    };
                cases.push(CaseReport {
                    preparation_index: cases.len(),
                    object_id: library.object_id().to_string(),
                    strategy: Strategy::PreferenceAware,
                    preparation_pose: current,
                    outcome,
                });
            }
            Some(TraceEvent::Grip) | None => {}
        }

        let automatic_pose = match (&state.mode, &mut approach) {
            (Mode::Automatic, Some((traj, cursor))) => {
                let samples = traj.samples();
                let pose = samples[(*cursor).min(samples.len() - 1)].pose;
                *cursor += 1;
                Some(pose)
            }
            _ => None,
        };
        let (next, commanded) = state
            .step(&hand, &config.shared_control, automatic_pose)
            .map_err(|source| ScenarioError::TraceEvent { line, source })?;
        state = next;
        if let Ok(solution) = model.solve_ik(&commanded, &joints) {
            joints = solution;
        }
        log.push(CommandLogEntry {
            step: record.step,
            t: record.t,
            mode: state.mode,
            blending: state.blending_active,
            pose: commanded,
        });
    }
    Ok(ReplayOutput {
        log,
        report: ExperimentReport::from_cases(config.seed, config.speed, config.dt, cases),
    })
}

pub fn replay_trace_file(
    scenario: &Scenario,
    path: impl AsRef<Path>,
) -> Result<ReplayOutput, ScenarioError> {
    let records = parse_trace(&read(path.as_ref())?)?;
    replay_trace(scenario, &records)
}

/// Object placements of the demo scene: id, center, grasp-sphere radius.
pub const DEMO_OBJECTS: [(&str, [f64; 3], f64); 3] = [
    ("mug", [0.45, -0.25, 0.15], 0.1),
    ("box", [0.55, 0.0, 0.1], 0.1),
    ("bottle", [0.45, 0.25, 0.15], 0.1),
];

/// Ready configuration of the built-in six-axis arm: tool pointing down in
/// front of the base.
pub fn demo_home() -> JointConfiguration {
    use std::f64::consts::FRAC_PI_2;
    JointConfiguration::new(vec![
        0.0, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2, 0.0,
    ])
}

/// Demo libraries: 150 candidates per object, seeded from `seed`.
pub fn demo_libraries(seed: u64) -> Vec<GraspLibrary> {
    DEMO_OBJECTS
        .iter()
        .enumerate()
        .map(|(i, (id, center, radius))| {
            generate_synthetic_library(
                *id,
                &Pose::from_position(Vec3::from_array(*center)),
                *radius,
                150,
                seed.wrapping_add(i as u64),
            )
            .expect("valid demo library parameters")
        })
        .collect()
}

/// Config for the demo scene as laid out by [`write_demo`].
pub fn demo_config(seed: u64, preparation_count: usize) -> ScenarioConfig {
    ScenarioConfig {
        robot_model_path: PathBuf::from("robot.json"),
        grasp_library_paths: DEMO_OBJECTS
            .iter()
            .map(|(id, _, _)| PathBuf::from(format!("libraries/{id}.json")))
            .collect(),
        preparation_poses: PreparationPoses::Random(RandomPreparation {
            count: preparation_count,
            ..Default::default()
        }),
        strategies: default_strategies(),
        speed: DEFAULT_SPEED,
        dt: DEFAULT_DT,
        selection: SelectionConfig::default(),
        shared_control: SharedControlConfig::default(),
        tracker_to_base: UnitQuaternion::identity(),
        home_configuration: Some(demo_home()),
        seed,
        output_path: Some(PathBuf::from("out")),
    }
}

/// Built-in six-axis arm, three objects with 150 synthetic grasps each, and
/// `preparation_count` random preparation poses per object.
pub fn demo_scenario(seed: u64, preparation_count: usize) -> Scenario {
    Scenario::new(
        demo_config(seed, preparation_count),
        RobotModel::six_axis(),
        demo_libraries(seed),
    )
    .expect("valid demo scenario")
}

/// Scripted operator session for the demo scene: manual motion toward an
/// object, hand-over and grip, then a return to manual control.
pub fn demo_trace(scenario: &Scenario, seed: u64, steps: usize) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = scenario.config.shared_control.dt();
    let start_hand = Vec3::new(0.0, 0.0, 1.0);
    let start_q = UnitQuaternion::rot_x(std::f64::consts::PI);
    let drift = Vec3::new(
        rng.random_range(0.1..0.25),
        rng.random_range(-0.15..0.15),
        rng.random_range(-0.35..-0.2),
    );
    let twist = Vec3::new(
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.5..0.5),
    );
    let steps = steps.max(8);
    let move_until = steps * 2 / 5;
    (0..steps)
        .map(|k| {
            let s = (k.min(move_until) as f64) / move_until as f64;
            let event = if k == move_until + 1 {
                Some(TraceEvent::ToAutomatic)
            } else if k == move_until + 2 {
                Some(TraceEvent::Grip)
            } else if k == steps * 4 / 5 {
                Some(TraceEvent::ToManual)
            } else {
                None
            };
            let q = start_q * UnitQuaternion::from_rotation_vector(twist * s);
            TraceRecord {
                step: k as u64,
                t: k as f64 * dt,
                hand: TraceHand {
                    p: start_hand + drift * s,
                    q,
                },
                event,
            }
        })
        .collect()
}

/// Writes the demo scene (model, libraries, experiment config, trace) into
/// `dir`.
pub fn write_demo(
    dir: &Path,
    seed: u64,
    preparation_count: usize,
) -> Result<Vec<PathBuf>, ScenarioError> {
    let scenario = demo_scenario(seed, preparation_count);
    let mut written = Vec::new();
    let mut put = |rel: &Path, text: String| -> Result<(), ScenarioError> {
        let path = dir.join(rel);
        write_file(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put(
        &scenario.config.robot_model_path,
        scenario.model.to_json_pretty(),
    )?;
    for (path, library) in scenario
        .config
        .grasp_library_paths
        .iter()
        .zip(&scenario.libraries)
    {
        put(path, library.to_json_pretty())?;
    }
    put(
        Path::new("experiment.json"),
        serde_json::to_string_pretty(&scenario.config).expect("config serializes"),
    )?;
    put(
        Path::new("trace.jsonl"),
        trace_to_jsonl(&demo_trace(&scenario, seed, 300)),
    )?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp_selection::GraspCandidate;

    fn small_scenario(preparations: PreparationPoses) -> Scenario {
        let mut config = demo_config(3, 4);
        config.preparation_poses = preparations;
        Scenario::new(config, RobotModel::six_axis(), demo_libraries(3)).unwrap()
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut c = demo_config(0, 5);
        c.strategies.clear();
        assert!(c.validate().is_err());
        let mut c = demo_config(0, 5);
        c.speed = 0.0;
        assert!(c.validate().is_err());
        let mut c = demo_config(0, 5);
        c.preparation_poses = PreparationPoses::Poses(vec![]);
        assert!(c.validate().is_err());
        let mut c = demo_config(0, 5);
        c.selection.k_linear = 40;
        assert!(c.validate().is_err());
        assert!(demo_config(0, 5).validate().is_ok());
    }

    #[test]
    fn config_json_round_trip() {
        let c = demo_config(7, 12);
        let text = serde_json::to_string(&c).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(text.contains(r#""preparation_poses":{"random":{"count":12"#));
    }

    #[test]
    fn object_center_is_recovered_from_synthetic_library() {
        let center = Vec3::new(0.3, -0.2, 0.4);
        let lib =
            generate_synthetic_library("o", &Pose::from_position(center), 0.08, 150, 5).unwrap();
        let (estimate, radius) = estimate_object_center(&lib);
        assert!((estimate - center).norm() < 1e-9);
        assert!((radius - 0.08).abs() < 1e-9);
    }

    #[test]
    fn demo_home_is_non_singular() {
        let model = RobotModel::six_axis();
        let score = model.penalized_manipulability(&demo_home()).unwrap();
        assert!(score.m > 0.0);
    }

    #[test]
    fn single_strategy_single_pose_gives_one_row_per_object() {
        let home_pose = RobotModel::six_axis()
            .forward_kinematics(&demo_home())
            .unwrap();
        let mut s = small_scenario(PreparationPoses::Poses(vec![home_pose]));
        s.config.strategies = vec![Strategy::PreferenceAware];
        s.libraries.truncate(1);
        let report = run_experiment(&s);
        assert_eq!(report.cases.len(), 1);
        assert_eq!(report.aggregate.len(), 1);
        assert_eq!(report.aggregate[&Strategy::PreferenceAware].cases, 1);
    }

    #[test]
    fn unreachable_preparation_is_a_case_failure() {
        let far = Pose::from_position(Vec3::new(5.0, 0.0, 0.0));
        let mut s = small_scenario(PreparationPoses::Poses(vec![far]));
        s.libraries.truncate(1);
        let report = run_experiment(&s);
        assert_eq!(report.cases.len(), 2);
        assert!(report.has_failures());
        assert!(report.to_csv().contains(",failed,"));
    }

    #[test]
    fn preparation_at_a_candidate_with_equal_scores_has_zero_path() {
        // Every candidate shares one pose, so every finalist has the same M and
        // the tie-break picks the one at distance zero.
        let model = RobotModel::six_axis();
        let pose = model.forward_kinematics(&demo_home()).unwrap();
        let candidates = (0..5)
            .map(|id| GraspCandidate {
                id,
                object_id: "o".into(),
                pose,
            })
            .collect();
        let lib = GraspLibrary::new("o", candidates).unwrap();
        let mut config = demo_config(1, 1);
        config.preparation_poses = PreparationPoses::Poses(vec![pose]);
        config.strategies = vec![Strategy::PreferenceAware];
        let s = Scenario::new(config, model, vec![lib]).unwrap();
        let report = run_experiment(&s);
        let m = report.cases[0].metrics().unwrap();
        assert_eq!(m.path_length, 0.0);
        assert_eq!(report.cases[0].selection().unwrap().chosen_id, 0);
    }

    #[test]
    fn experiment_is_deterministic() {
        let s = demo_scenario(11, 3);
        let a = run_experiment(&s).to_json();
        let b = run_experiment(&s).to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_parse_errors_name_the_line() {
        let good = r#"{"step":0,"t":0.0,"hand":{"p":[0,0,0],"q":[1,0,0,0]},"event":null}"#;
        let bad = r#"{"step":1,"t":0.02,"hand":{"p":[0,0],"q":[1,0,0,0]},"event":null}"#;
        let text = format!("{good}\n\n{bad}\n");
        match parse_trace(&text) {
            Err(ScenarioError::TraceParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = good.replace("null", "\"jump\"");
        assert!(parse_trace(&unknown).is_err());
        assert_eq!(parse_trace(good).unwrap().len(), 1);
    }

    #[test]
    fn replay_without_events_is_pure_manual_following() {
        let s = demo_scenario(2, 1);
        let mut trace = demo_trace(&s, 2, 40);
        for r in &mut trace {
            r.event = None;
        }
        let out = replay_trace(&s, &trace).unwrap();
        assert_eq!(out.log.len(), 40);
        assert!(out.log.iter().all(|e| e.mode == Mode::Manual));
        assert!(out.report.cases.is_empty());
        let start = out.log[0].pose.position;
        for (entry, record) in out.log.iter().zip(&trace) {
            let expected = start + (record.hand.p - trace[0].hand.p);
            assert!((entry.pose.position - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn replay_with_grip_reaches_the_selected_grasp() {
        let s = demo_scenario(4, 1);
        let trace = demo_trace(&s, 4, 400);
        let out = replay_trace(&s, &trace).unwrap();
        assert_eq!(out.report.cases.len(), 1);
        let case = &out.report.cases[0];
        let selection = case
            .selection()
            .unwrap_or_else(|| panic!("grip failed: {case:?}"));
        let grip_line = trace
            .iter()
            .position(|r| r.event == Some(TraceEvent::Grip))
            .unwrap();
        let back_line = trace
            .iter()
            .position(|r| r.event == Some(TraceEvent::ToManual))
            .unwrap();
        // The approach either finished before the operator took over again, or
        // was still running; either way the last automatic pose lies on it.
        let last_auto = &out.log[back_line - 1];
        assert_eq!(last_auto.mode, Mode::Automatic);
        let steps = back_line - grip_line;
        let approach =
            plan_approach(&case.preparation_pose, &selection.chosen_pose, 0.1, 0.02).unwrap();
        let idx = (steps - 1).min(approach.len() - 1);
        assert_eq!(last_auto.pose, approach.samples()[idx].pose);
        // Continuity at the switch back to manual.
        let jump = linear_distance(&out.log[back_line].pose.position, &last_auto.pose.position);
        assert!(jump < 1e-12);
    }

    #[test]
    fn replay_rejects_invalid_switches() {
        let s = demo_scenario(4, 1);
        let mut trace = demo_trace(&s, 4, 20);
        trace[3].event = Some(TraceEvent::ToManual);
        match replay_trace(&s, &trace) {
            Err(ScenarioError::TraceEvent { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
