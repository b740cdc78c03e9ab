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

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Reference values are computed here from
//! first principles, not through the code under test.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use altgrasp_core::geometry::{angular_chord_distance, slerp, Pose, UnitQuaternion, Vec3};
use altgrasp_core::grasp_selection::{select_grasp, GraspCandidate, GraspLibrary, SelectionConfig};
use altgrasp_core::kinematics::JointConfiguration;
use altgrasp_core::scenario::{demo_home, demo_scenario, run_experiment, CaseReport, Strategy};
use altgrasp_core::shared_control::{
    CalibrationFrame, ControlState, HandSample, Mode, SharedControlConfig,
};
use altgrasp_core::RobotModel;

// Pinned tolerances and sizes.
const GEOMETRY_PAIRS: usize = 10_000;
const CHORD_TOL: f64 = 1e-12;
const SLERP_TOL: f64 = 1e-9;
const GEOMETRY_BUDGET: Duration = Duration::from_secs(5);

const S_TOL: f64 = 1e-9;
const FK_TOL: f64 = 1e-12;
const JACOBIAN_CONFIGS: usize = 1_000;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;
const IK_TRIALS: usize = 500;
const IK_SEED_PERTURBATION: f64 = 0.3;
const IK_POS_TOL: f64 = 1e-4;
const IK_ANG_TOL: f64 = 1e-3;
const IK_MIN_SUCCESS: f64 = 0.95;

const SWITCH_TRACES: usize = 100;
const SWITCH_JUMP_TOL: f64 = 1e-12;
const BLEND_DECAY_TOL: f64 = 1e-9;

const ORACLE_LIBRARIES: usize = 100;
const ORACLE_CANDIDATES: usize = 150;

const EXPERIMENT_SEED: u64 = 42;
const EXPERIMENT_POSES: usize = 50;
const EXPERIMENT_NO_WORSE: f64 = 0.9;
const EXPERIMENT_SPEED: f64 = 0.1;
const EXPERIMENT_BUDGET: Duration = Duration::from_secs(120);

const DETERMINISM_SEED: u64 = 11;
const DETERMINISM_POSES: usize = 20;

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, Check); 6] = [
        ("geometry suite", geometry_suite),
        ("kinematics suite", kinematics_suite),
        ("mode-switch continuity", mode_switch_continuity),
        ("pipeline oracle equivalence", pipeline_oracle_equivalence),
        ("strategy comparison reproduction", experiment_reproduction),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {name}: {} [{:.2} s]",
            v.detail,
            started.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// Independent quaternion arithmetic on raw (w, x, y, z) arrays.

fn q_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn q_conj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

fn q_dot(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn q_angle(a: [f64; 4], b: [f64; 4]) -> f64 {
    let r = q_mul(q_conj(a), b);
    let v = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
    2.0 * v.atan2(r[0].abs())
}

fn q_chord(a: [f64; 4], b: [f64; 4]) -> f64 {
    let plus: f64 = (0..4).map(|i| (a[i] + b[i]).powi(2)).sum();
    let minus: f64 = (0..4).map(|i| (a[i] - b[i]).powi(2)).sum();
    plus.sqrt().min(minus.sqrt())
}

fn random_quaternion(rng: &mut ChaCha8Rng) -> UnitQuaternion {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q_dot(v, v).sqrt();
        if n > 0.1 && n < 1.0 {
            return UnitQuaternion::normalize(v[0], v[1], v[2], v[3]).unwrap();
        }
    }
}

fn geometry_suite() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cover_failures = 0;
    let mut worst_chord: f64 = 0.0;
    let mut worst_slerp: f64 = 0.0;
    for _ in 0..GEOMETRY_PAIRS {
        let a = random_quaternion(&mut rng);
        let b = random_quaternion(&mut rng);
        let [w, x, y, z] = b.to_array();
        let neg_b = UnitQuaternion::new(-w, -x, -y, -z).unwrap();
        let d = angular_chord_distance(&a, &b);
        if angular_chord_distance(&a, &neg_b) != d
            || q_chord(a.to_array(), [-w, -x, -y, -z]) != q_chord(a.to_array(), b.to_array())
        {
            cover_failures += 1;
        }
        let dot = q_dot(a.to_array(), b.to_array()).abs();
        worst_chord = worst_chord.max((d * d - (2.0 - 2.0 * dot)).abs());

        let alpha: f64 = rng.random_range(0.0..=1.0);
        let s = slerp(&a, &b, alpha).unwrap().to_array();
        let total = q_angle(a.to_array(), b.to_array());
        let from_start = q_angle(a.to_array(), s);
        let to_end = q_angle(s, b.to_array());
        worst_slerp = worst_slerp
            .max((from_start - alpha * total).abs())
            .max((to_end - (1.0 - alpha) * total).abs());
    }
    let elapsed = started.elapsed();
    verdict(
        cover_failures == 0
            && worst_chord <= CHORD_TOL
            && worst_slerp <= SLERP_TOL
            && elapsed < GEOMETRY_BUDGET,
        format!(
            "{GEOMETRY_PAIRS} pairs, double-cover mismatches {cover_failures}, \
             max chord identity error {worst_chord:.2e} (tol {CHORD_TOL:e}), \
             max slerp angle error {worst_slerp:.2e} (tol {SLERP_TOL:e}), \
             {:.2} s (budget {} s)",
            elapsed.as_secs_f64(),
            GEOMETRY_BUDGET.as_secs()
        ),
    )
}

fn random_configuration(
    model: &RobotModel,
    rng: &mut ChaCha8Rng,
    margin: f64,
) -> JointConfiguration {
    JointConfiguration::new(
        model
            .joints()
            .iter()
            .map(|j| rng.random_range(j.min + margin..j.max - margin))
            .collect(),
    )
}

/// Central differences of FK: position rows from positions, angular rows
/// from the rotation vector of R(+h) R(-h)^T.
fn finite_difference_jacobian(model: &RobotModel, theta: &JointConfiguration) -> Vec<[f64; 6]> {
    (0..model.dof())
        .map(|i| {
            let mut plus = theta.angles().to_vec();
            let mut minus = theta.angles().to_vec();
            plus[i] += FD_STEP;
            minus[i] -= FD_STEP;
            let fp = model
                .forward_kinematics(&JointConfiguration::new(plus))
                .unwrap();
            let fm = model
                .forward_kinematics(&JointConfiguration::new(minus))
                .unwrap();
            let dp = (fp.position - fm.position) * (1.0 / (2.0 * FD_STEP));
            let r = q_mul(fp.orientation.to_array(), q_conj(fm.orientation.to_array()));
            let r = if r[0] < 0.0 { r.map(|c| -c) } else { r };
            let v = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
            let angle = 2.0 * v.atan2(r[0]);
            let scale = if v > 0.0 { angle / v } else { 2.0 };
            let k = scale / (2.0 * FD_STEP);
            [dp.x, dp.y, dp.z, r[1] * k, r[2] * k, r[3] * k]
        })
        .collect()
}

fn kinematics_suite() -> Verdict {
    let mut problems = Vec::new();

    // Planar two-link arm with unit links.
    let planar = RobotModel::planar_2r();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_fk: f64 = 0.0;
    for _ in 0..1_000 {
        let t1: f64 = rng.random_range(-PI..PI);
        let t2: f64 = rng.random_range(-PI..PI);
        let p = planar
            .forward_kinematics(&JointConfiguration::new(vec![t1, t2]))
            .unwrap()
            .position;
        let expected = Vec3::new(t1.cos() + (t1 + t2).cos(), t1.sin() + (t1 + t2).sin(), 0.0);
        worst_fk = worst_fk.max((p - expected).norm());
    }
    if worst_fk > FK_TOL {
        problems.push(format!("planar FK error {worst_fk:.2e}"));
    }
    let mut worst_s: f64 = 0.0;
    for t2 in [0.0, FRAC_PI_6, FRAC_PI_2] {
        let s = planar
            .singularity_term(&JointConfiguration::new(vec![0.4, t2]))
            .unwrap();
        worst_s = worst_s.max((s - t2.sin().abs()).abs());
    }
    if worst_s > S_TOL {
        problems.push(format!("planar S error {worst_s:.2e}"));
    }

    // Analytic Jacobian against finite differences.
    let mut worst_jac: f64 = 0.0;
    for model in [RobotModel::six_axis(), planar.clone()] {
        for _ in 0..JACOBIAN_CONFIGS {
            let theta = random_configuration(&model, &mut rng, 0.0);
            let j = model.jacobian(&theta).unwrap();
            let fd = finite_difference_jacobian(&model, &theta);
            for (col, expected) in fd.iter().enumerate() {
                for row in 0..6 {
                    worst_jac = worst_jac.max((j[(row, col)] - expected[row]).abs());
                }
            }
        }
    }
    if worst_jac > FD_TOL {
        problems.push(format!("Jacobian error {worst_jac:.2e}"));
    }

    // Inverse kinematics round trip on the six-axis arm.
    let arm = RobotModel::six_axis();
    let mut successes = 0;
    for _ in 0..IK_TRIALS {
        let theta = random_configuration(&arm, &mut rng, IK_SEED_PERTURBATION);
        let target = arm.forward_kinematics(&theta).unwrap();
        let seed = JointConfiguration::new(
            theta
                .angles()
                .iter()
                .map(|a| a + rng.random_range(-IK_SEED_PERTURBATION..IK_SEED_PERTURBATION))
                .collect(),
        );
        if let Ok(solution) = arm.solve_ik(&target, &seed) {
            let reached = arm.forward_kinematics(&solution).unwrap();
            if (reached.position - target.position).norm() <= IK_POS_TOL
                && q_angle(
                    reached.orientation.to_array(),
                    target.orientation.to_array(),
                ) <= IK_ANG_TOL
            {
                successes += 1;
            }
        }
    }
    let rate = successes as f64 / IK_TRIALS as f64;
    if rate < IK_MIN_SUCCESS {
        problems.push(format!("IK success {rate:.3}"));
    }

    verdict(
        problems.is_empty(),
        format!(
            "planar FK err {worst_fk:.1e}, S err {worst_s:.1e} (tol {S_TOL:e}), \
             Jacobian vs FD max err {worst_jac:.1e} over {JACOBIAN_CONFIGS}x2 configs (tol {FD_TOL:e}), \
             IK round trip {successes}/{IK_TRIALS} = {rate:.3} (min {IK_MIN_SUCCESS}){}",
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {}", problems.join(", "))
            }
        ),
    )
}

fn mode_switch_continuity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = SharedControlConfig::default();
    let decay = 1.0 - config.alpha;
    let mut edges = 0;
    let mut blend_steps = 0;
    let mut worst_jump: f64 = 0.0;
    let mut worst_decay: f64 = 0.0;

    for _ in 0..SWITCH_TRACES {
        let calibration = CalibrationFrame::new(random_quaternion(&mut rng));
        let steps = rng.random_range(150..300);
        let mut switch_at: Vec<u64> = (0..rng.random_range(2..7))
            .map(|_| rng.random_range(1..steps as u64))
            .collect();
        switch_at.sort_unstable();
        switch_at.dedup();

        let mut hand_p = Vec3::new(rng.random_range(-0.5..0.5), 0.0, 1.0);
        let mut hand_q = random_quaternion(&mut rng);
        let start = Pose::new(Vec3::new(0.4, 0.0, 0.3), random_quaternion(&mut rng));
        let mut state =
            ControlState::engaged(start, calibration, &HandSample::new(hand_p, hand_q, 0));
        let mut residual: Option<f64> = None;

        for step in 1..steps as u64 {
            hand_p += Vec3::new(
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.01..0.01),
            );
            if state.mode == Mode::Automatic {
                // The operator may reorient the hand while the robot drives.
                hand_q = hand_q
                    * UnitQuaternion::from_rotation_vector(Vec3::new(
                        rng.random_range(-0.2..0.2),
                        rng.random_range(-0.2..0.2),
                        rng.random_range(-0.2..0.2),
                    ));
            }
            let hand = HandSample::new(hand_p, hand_q, step);
            let mut previous = state.last_commanded;
            let mut entered_manual = false;
            if switch_at.contains(&step) {
                state = match state.mode {
                    Mode::Manual => state.switch_to_automatic().unwrap(),
                    Mode::Automatic => {
                        entered_manual = true;
                        previous = state.last_commanded;
                        state.switch_to_manual(&hand).unwrap()
                    }
                };
                residual = None;
            }
            let automatic = Pose::new(
                previous.position
                    + Vec3::new(
                        rng.random_range(-0.005..0.005),
                        rng.random_range(-0.005..0.005),
                        rng.random_range(-0.005..0.005),
                    ),
                previous.orientation,
            );
            let (next, commanded) = state.step(&hand, &config, Some(automatic)).unwrap();
            if entered_manual {
                edges += 1;
                worst_jump = worst_jump.max((commanded.position - previous.position).norm());
            }
            if state.mode == Mode::Manual && state.blending_active {
                let target = state.target_orientation(&hand).to_array();
                let before = q_angle(state.last_commanded.orientation.to_array(), target);
                let after = q_angle(commanded.orientation.to_array(), target);
                if let Some(r) = residual {
                    // The hand orientation is fixed in manual mode, so the
                    // residual left by the last step is this step's start.
                    worst_decay = worst_decay.max((r - before).abs());
                }
                worst_decay = worst_decay.max((after - decay * before).abs());
                blend_steps += 1;
                residual = Some(after);
            } else {
                residual = None;
            }
            state = next;
        }
    }
    verdict(
        edges > 0 && worst_jump < SWITCH_JUMP_TOL && worst_decay <= BLEND_DECAY_TOL,
        format!(
            "{SWITCH_TRACES} traces, {edges} automatic->manual edges, max jump {worst_jump:.1e} m \
             (tol {SWITCH_JUMP_TOL:e}), {blend_steps} blend steps, max decay error {worst_decay:.1e} \
             (tol {BLEND_DECAY_TOL:e})"
        ),
    )
}

/// Exhaustive selection: sort everything by orientation distance, keep 30,
/// sort those by position distance, keep 6, take the best manipulability.
fn oracle_select(
    library: &GraspLibrary,
    ee: &Pose,
    model: &RobotModel,
    seed: &JointConfiguration,
    config: &SelectionConfig,
) -> Option<u32> {
    let ee_q = ee.orientation.to_array();
    let ee_p = ee.position.to_array();
    let mut by_angle: Vec<(f64, u32, &GraspCandidate)> = library
        .candidates()
        .iter()
        .map(|c| (q_chord(c.pose.orientation.to_array(), ee_q), c.id, c))
        .collect();
    by_angle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    by_angle.truncate(config.k_angular);

    let mut by_position: Vec<(f64, u32, &GraspCandidate)> = by_angle
        .iter()
        .map(|(_, id, c)| {
            let p = c.pose.position.to_array();
            let d =
                ((p[0] - ee_p[0]).powi(2) + (p[1] - ee_p[1]).powi(2) + (p[2] - ee_p[2]).powi(2))
                    .sqrt();
            (d, *id, *c)
        })
        .collect();
    by_position.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    by_position.truncate(config.k_linear);

    let mut best: Option<(f64, f64, u32)> = None;
    for (d, id, c) in by_position {
        let Ok(solution) = model.solve_ik(&c.pose, seed) else {
            continue;
        };
        let m = model.penalized_manipulability(&solution).unwrap().m;
        let better = match best {
            None => true,
            Some((bm, bd, bid)) => m > bm || (m == bm && (d < bd || (d == bd && id < bid))),
        };
        if better {
            best = Some((m, d, id));
        }
    }
    best.map(|(_, _, id)| id)
}

fn random_library(rng: &mut ChaCha8Rng, object: &str) -> (GraspLibrary, Pose) {
    let center = Vec3::new(
        rng.random_range(0.35..0.6),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.05..0.25),
    );
    let mut ids: Vec<u32> = (0..10_000).collect();
    ids.shuffle(rng);
    let mut candidates: Vec<GraspCandidate> = Vec::with_capacity(ORACLE_CANDIDATES);
    for (i, id) in ids.into_iter().take(ORACLE_CANDIDATES).enumerate() {
        // Every tenth candidate repeats an earlier pose to exercise the
        // id tie-break.
        let pose = if i % 10 == 9 {
            candidates[rng.random_range(0..i)].pose
        } else {
            let offset = Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(0.0..0.12),
            );
            Pose::new(center + offset, random_quaternion(rng))
        };
        candidates.push(GraspCandidate {
            id,
            object_id: object.to_string(),
            pose,
        });
    }
    let ee = Pose::new(
        center
            + Vec3::new(
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
                rng.random_range(0.0..0.2),
            ),
        random_quaternion(rng),
    );
    (GraspLibrary::new(object, candidates).unwrap(), ee)
}

fn pipeline_oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = RobotModel::six_axis();
    let seed = demo_home();
    let config = SelectionConfig::default();
    let mut matches = 0;
    let mut infeasible = 0;
    let mut mismatches = Vec::new();
    for i in 0..ORACLE_LIBRARIES {
        let (library, ee) = random_library(&mut rng, &format!("object{i}"));
        let expected = oracle_select(&library, &ee, &model, &seed, &config);
        let actual = select_grasp(&library, &ee, &model, &seed, &config)
            .ok()
            .map(|r| r.chosen.id);
        if expected == actual {
            matches += 1;
            if expected.is_none() {
                infeasible += 1;
            }
        } else {
            mismatches.push(format!("#{i}: oracle {expected:?} vs {actual:?}"));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{matches}/{ORACLE_LIBRARIES} libraries of {ORACLE_CANDIDATES} candidates match \
             ({infeasible} with no feasible finalist on both sides){}",
            if mismatches.is_empty() {
                String::new()
            } else {
                format!("; {}", mismatches.join(", "))
            }
        ),
    )
}

fn experiment_reproduction() -> Verdict {
    let started = Instant::now();
    let scenario = demo_scenario(EXPERIMENT_SEED, EXPERIMENT_POSES);
    let report = run_experiment(&scenario);
    let elapsed = started.elapsed();
    let dt = scenario.config.dt;

    let find = |case: &CaseReport, strategy: Strategy| {
        report.cases.iter().find(|c| {
            c.preparation_index == case.preparation_index
                && c.object_id == case.object_id
                && c.strategy == strategy
        })
    };

    let mut pairs = 0;
    let mut no_worse = 0;
    let mut failures = 0;
    let mut timing_violations = 0;
    let (mut sum_pa, mut n_pa, mut rot_pa) = (0.0, 0, 0.0);
    let (mut sum_mo, mut n_mo, mut rot_mo) = (0.0, 0, 0.0);
    for case in &report.cases {
        match case.metrics() {
            Some(m) => {
                if (m.completion_time - m.path_length / EXPERIMENT_SPEED).abs() > dt {
                    timing_violations += 1;
                }
                match case.strategy {
                    Strategy::PreferenceAware => {
                        sum_pa += m.path_length;
                        rot_pa += m.orientation_travel;
                        n_pa += 1;
                    }
                    Strategy::ManipulabilityOnly => {
                        sum_mo += m.path_length;
                        rot_mo += m.orientation_travel;
                        n_mo += 1;
                    }
                }
            }
            None => failures += 1,
        }
        if case.strategy == Strategy::PreferenceAware {
            pairs += 1;
            let baseline = find(case, Strategy::ManipulabilityOnly).and_then(|c| c.metrics());
            // A failed preference-aware case does not count as no worse.
            if let (Some(pa), Some(mo)) = (case.metrics(), baseline) {
                if pa.path_length <= mo.path_length {
                    no_worse += 1;
                }
            } else if let (Some(_), None) = (case.metrics(), baseline) {
                no_worse += 1;
            }
        }
    }
    let rate = no_worse as f64 / pairs.max(1) as f64;
    let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
    let (mp_pa, mp_mo) = (mean(sum_pa, n_pa), mean(sum_mo, n_mo));
    let (mr_pa, mr_mo) = (mean(rot_pa, n_pa), mean(rot_mo, n_mo));
    verdict(
        pairs >= 3 * EXPERIMENT_POSES
            && rate >= EXPERIMENT_NO_WORSE
            && mp_pa < mp_mo
            && mr_pa < mr_mo
            && timing_violations == 0
            && elapsed < EXPERIMENT_BUDGET,
        format!(
            "{pairs} paired cases (seed {EXPERIMENT_SEED}), preference-aware no worse in {no_worse} \
             = {rate:.3} (min {EXPERIMENT_NO_WORSE}), mean path {mp_pa:.4} vs {mp_mo:.4} m, \
             mean orientation travel {mr_pa:.4} vs {mr_mo:.4} rad, {failures} failed cases, \
             {timing_violations} completion-time violations (tol one dt = {dt} s), \
             {:.1} s (budget {} s)",
            elapsed.as_secs_f64(),
            EXPERIMENT_BUDGET.as_secs()
        ),
    )
}

fn altgrasp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_altgrasp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

fn cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let demo = root.join("demo");
    let p = |path: &Path| path.to_str().unwrap().to_string();
    let init = altgrasp(&[
        "init-demo",
        "--dir",
        &p(&demo),
        "--seed",
        &DETERMINISM_SEED.to_string(),
        "--poses",
        &DETERMINISM_POSES.to_string(),
    ]);
    if !init.status.success() {
        return verdict(
            false,
            format!(
                "init-demo failed: {}",
                String::from_utf8_lossy(&init.stderr)
            ),
        );
    }
    let config = p(&demo.join("experiment.json"));
    let trace = p(&demo.join("trace.jsonl"));
    let seed = DETERMINISM_SEED.to_string();

    let mut problems = Vec::new();
    let mut compared = 0;
    for (kind, files) in [
        ("run", &["report.json", "summary.csv"][..]),
        (
            "replay",
            &["commanded_poses.csv", "report.json", "summary.csv"][..],
        ),
    ] {
        let outs: Vec<_> = ["a", "b"]
            .iter()
            .map(|tag| {
                let out = root.join(format!("{kind}_{tag}"));
                let mut args = vec![kind, "--config", &config, "--seed", &seed];
                if kind == "replay" {
                    args.extend(["--trace", trace.as_str()]);
                }
                let out_s = p(&out);
                args.extend(["--out", out_s.as_str()]);
                let status = altgrasp(&args).status;
                (out, status)
            })
            .collect();
        for (out, status) in &outs {
            if status.code() != Some(0) {
                problems.push(format!(
                    "{kind} into {} exited {:?}",
                    out.display(),
                    status.code()
                ));
            }
        }
        for file in files {
            let a = read(&outs[0].0.join(file));
            let b = read(&outs[1].0.join(file));
            compared += 1;
            if a.is_empty() || a != b {
                problems.push(format!("{kind}/{file} differs or is missing"));
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "{compared} output files compared across two invocations each of run and replay{}",
            if problems.is_empty() {
                ", all byte-identical".to_string()
            } else {
                format!("; {}", problems.join(", "))
            }
        ),
    )
}
