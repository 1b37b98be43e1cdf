//! Stage one of the pipeline: antipodal two-finger grasp sampling on the
//! functional part, width-to-hand mapping through a preset table, lifting
//! to palm poses, collision filtering, camera-proximity selection, and
//! arm IK seeding.

use crate::geom::{symmetric_eigen_min, vec3, Pose, Rotation, Vec3};
use crate::rng::substream;
use crate::scene::{
    dls_solve, joint_limits, render_scene, CameraModel, PointCloud, RenderConfig, RobotModel,
    SceneState, ARM_DOF, FINGERS, FINGER_JOINTS, HAND_DOF, THUMB,
};
use crate::segment::{segment_with, PointLabeler};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Hand aperture bound, meters.
pub const W_MAX: f64 = 0.11;
pub const WIDTH_BINS: usize = 8;
pub const WIDTH_PRESETS: usize = 4;
pub const WIDTH_TABLE_SCHEMA_VERSION: u32 = 1;

const NORMAL_NEIGHBORS: usize = 10;

/// Parallel-jaw grasp: closing axis = rotation column x, approach = z,
/// translation = jaw midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFingerGrasp {
    pub pose: Pose,
    pub width: f64,
}

/// Palm pose plus the 16 hand joint angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DexterousGrasp {
    pub pose: Pose,
    pub hand_config: [f64; HAND_DOF],
}

/// Pose as stored in the width-table file: unit quaternion (w x y z)
/// plus translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub quat: [f64; 4],
    pub t: [f64; 3],
}

impl PoseRecord {
    pub fn from_pose(pose: &Pose) -> PoseRecord {
        let (w, x, y, z) = pose.rot.quat();
        PoseRecord { quat: [w, x, y, z], t: [pose.t.x, pose.t.y, pose.t.z] }
    }

    pub fn to_pose(&self) -> Pose {
        let [w, x, y, z] = self.quat;
        Pose::new(
            Rotation::from_quat(w, x, y, z),
            vec3(self.t[0], self.t[1], self.t[2]),
        )
    }
}

/// One hand shape for a width bin: joint angles plus the palm pose
/// expressed in the two-finger grasp frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthPreset {
    pub hand_config: Vec<f64>,
    pub palm_offset: PoseRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthBin {
    /// Representative width, the bin center.
    pub width: f64,
    pub presets: Vec<WidthPreset>,
}

/// Discretized width-to-hand mapping: `n_bins` bins over [0, w_max],
/// four fingertip-gap-calibrated presets each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthTable {
    pub schema_version: u32,
    pub n_bins: usize,
    pub w_max: f64,
    pub bins: Vec<WidthBin>,
}

impl WidthTable {
    /// The table shipped with the crate.
    pub fn builtin() -> WidthTable {
        static TABLE: OnceLock<WidthTable> = OnceLock::new();
        TABLE
            .get_or_init(|| {
                WidthTable::from_json(include_str!("../data/width_table.json"))
                    .expect("embedded width table")
            })
            .clone()
    }

    pub fn from_json(json: &str) -> Result<WidthTable> {
        let table: WidthTable = serde_json::from_str(json)?;
        if table.schema_version != WIDTH_TABLE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "width table schema {} unsupported, want {}",
                table.schema_version, WIDTH_TABLE_SCHEMA_VERSION
            )));
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("width table serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<WidthTable> {
        let json = std::fs::read_to_string(path)
            .map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
        WidthTable::from_json(&json)
    }

    /// Structural and FK checks: bins partition [0, w_max], every preset
    /// stays within joint limits, and its fingertip gap reproduces the
    /// bin width with the fingertip midpoint at the grasp origin.
    pub fn validate(&self, robot: &RobotModel) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != WIDTH_TABLE_SCHEMA_VERSION {
            return bad(format!("width table schema {}", self.schema_version));
        }
        if self.n_bins == 0 || self.n_bins != self.bins.len() {
            return bad(format!(
                "width table has {} bins, declares {}",
                self.bins.len(),
                self.n_bins
            ));
        }
        if !self.w_max.is_finite() || self.w_max <= 0.0 {
            return bad(format!("width table w_max {}", self.w_max));
        }
        for (i, bin) in self.bins.iter().enumerate() {
            let lo = self.w_max * i as f64 / self.n_bins as f64;
            let hi = self.w_max * (i + 1) as f64 / self.n_bins as f64;
            if !(bin.width > lo && bin.width < hi) {
                return bad(format!("bin {} width {} outside ({}, {})", i, bin.width, lo, hi));
            }
            if bin.presets.len() != WIDTH_PRESETS {
                return bad(format!("bin {} has {} presets", i, bin.presets.len()));
            }
            for (p, preset) in bin.presets.iter().enumerate() {
                if preset.hand_config.len() != HAND_DOF {
                    return bad(format!("bin {} preset {} config length", i, p));
                }
                for (f, finger) in robot.fingers.iter().enumerate() {
                    for (k, joint) in finger.joints.iter().enumerate() {
                        let angle = preset.hand_config[f * FINGER_JOINTS + k];
                        if angle < joint.lo - 1.0e-9 || angle > joint.hi + 1.0e-9 {
                            return bad(format!(
                                "bin {} preset {} joint {}.{} out of limits",
                                i, p, f, k
                            ));
                        }
                    }
                }
                let qn: f64 = preset.quat_norm();
                if (qn - 1.0).abs() > 1.0e-6 {
                    return bad(format!("bin {} preset {} quaternion norm {}", i, p, qn));
                }
                let mut b = [0.0; HAND_DOF];
                b.copy_from_slice(&preset.hand_config);
                let (gap, mid) = hand_gap_midpoint(robot, preset.palm_offset.to_pose(), &b);
                if (gap - bin.width).abs() > 0.01 {
                    return bad(format!(
                        "bin {} preset {} fingertip gap {} vs width {}",
                        i, p, gap, bin.width
                    ));
                }
                if mid.norm() > 1.0e-6 {
                    return bad(format!("bin {} preset {} midpoint drift {}", i, p, mid.norm()));
                }
            }
        }
        Ok(())
    }
}

impl WidthPreset {
    fn quat_norm(&self) -> f64 {
        self.palm_offset.quat.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One lifted grasp hypothesis with its selection metadata.
#[derive(Debug, Clone)]
pub struct GraspCandidate {
    pub dexterous: DexterousGrasp,
    pub source: TwoFingerGrasp,
    /// Preset id, 1-based.
    pub preset: usize,
    pub camera_distance: f64,
    pub collision_free: bool,
}

/// Fingertip gap and thumb-to-centroid midpoint of a posed hand.
fn hand_gap_midpoint(robot: &RobotModel, palm: Pose, b: &[f64; HAND_DOF]) -> (f64, Vec3) {
    let (_, tips) = robot.fk_hand(palm, b);
    let mut centroid = Vec3::ZERO;
    for tip in tips.iter().take(THUMB) {
        centroid = centroid + *tip;
    }
    centroid = centroid * (1.0 / THUMB as f64);
    ((tips[THUMB] - centroid).norm(), (tips[THUMB] + centroid) * 0.5)
}

/// Per-point unit normals from plane fits over the 10 nearest neighbors,
/// oriented away from the cloud centroid.
pub fn estimate_normals(points: &[Vec3]) -> Vec<Vec3> {
    let n = points.len();
    let mut centroid = Vec3::ZERO;
    for p in points {
        centroid = centroid + *p;
    }
    if n > 0 {
        centroid = centroid * (1.0 / n as f64);
    }
    let k = NORMAL_NEIGHBORS.min(n.saturating_sub(1));
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let p = points[i];
        let mut nearest: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((points[j] - p).norm_squared(), j))
            .collect();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        nearest.truncate(k);

        let mut mu = p;
        for &(_, j) in &nearest {
            mu = mu + points[j];
        }
        mu = mu * (1.0 / (nearest.len() + 1) as f64);
        let mut cov = [[0.0; 3]; 3];
        let mut accumulate = |q: Vec3| {
            let d = q - mu;
            let v = [d.x, d.y, d.z];
            for r in 0..3 {
                for s in 0..3 {
                    cov[r][s] += v[r] * v[s];
                }
            }
        };
        accumulate(p);
        for &(_, j) in &nearest {
            accumulate(points[j]);
        }
        let mut normal = symmetric_eigen_min(cov).normalized().unwrap_or(Vec3::Z);
        if normal.dot(p - centroid) < 0.0 {
            normal = normal * -1.0;
        }
        normals.push(normal);
    }
    normals
}

/// Antipodal candidate pairs on the functional cloud: up to `k` grasps
/// where both estimated normals oppose within 30 degrees along the pair
/// axis and the pair distance fits the hand aperture.
pub fn sample_two_finger_grasps(
    pf: &PointCloud,
    k: usize,
    seed: u64,
) -> Result<Vec<TwoFingerGrasp>> {
    let pts = &pf.points;
    let n = pts.len();
    let normals = estimate_normals(pts);
    let oppose = (30.0_f64).to_radians().cos();
    let mut grasps = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pts[j] - pts[i];
            let w = d.norm();
            if w < 1.0e-9 || w > W_MAX {
                continue;
            }
            let dir = d * (1.0 / w);
            if normals[i].dot(dir).abs() < oppose || normals[j].dot(dir).abs() < oppose {
                continue;
            }
            let ni = if normals[i].dot(dir) <= 0.0 { normals[i] } else { normals[i] * -1.0 };
            let nj = if normals[j].dot(dir) >= 0.0 { normals[j] } else { normals[j] * -1.0 };
            if ni.dot(nj) > -oppose {
                continue;
            }
            let mean_inward = (ni + nj) * -0.5;
            let residual = mean_inward - dir * mean_inward.dot(dir);
            let approach = residual.normalized().unwrap_or_else(|| dir.any_orthogonal());
            let rot = Rotation::from_cols(dir, approach.cross(dir), approach);
            grasps.push(TwoFingerGrasp {
                pose: Pose::new(rot, (pts[i] + pts[j]) * 0.5),
                width: w,
            });
        }
    }
    if grasps.is_empty() {
        return Err(Error::NoGraspFound);
    }
    if grasps.len() > k {
        let mut rng = substream(seed, "grasp", 0);
        for i in 0..k {
            let j = rng.gen_range(i..grasps.len());
            grasps.swap(i, j);
        }
        grasps.truncate(k);
    }
    Ok(grasps)
}

/// The bin containing width `w`.
pub fn map_width(table: &WidthTable, w: f64) -> Result<&WidthBin> {
    if !w.is_finite() || w < 0.0 || w > table.w_max {
        return Err(Error::WidthOutOfRange(w));
    }
    let n = table.bins.len();
    let idx = ((w / table.w_max) * n as f64) as usize;
    Ok(&table.bins[idx.min(n - 1)])
}

/// Compose the grasp pose with the preset's palm offset.
pub fn lift_to_dexterous(
    g: &TwoFingerGrasp,
    table: &WidthTable,
    preset: usize,
) -> Result<DexterousGrasp> {
    assert!((1..=WIDTH_PRESETS).contains(&preset), "preset id {}", preset);
    let bin = map_width(table, g.width)?;
    let entry = &bin.presets[preset - 1];
    let mut hand_config = [0.0; HAND_DOF];
    hand_config.copy_from_slice(&entry.hand_config);
    Ok(DexterousGrasp {
        pose: g.pose.compose(entry.palm_offset.to_pose()),
        hand_config,
    })
}

/// Lift every grasp through all four presets, tagging camera distances.
pub fn build_candidates(
    grasps: &[TwoFingerGrasp],
    table: &WidthTable,
    camera: &CameraModel,
) -> Result<Vec<GraspCandidate>> {
    let mut out = Vec::with_capacity(grasps.len() * WIDTH_PRESETS);
    for g in grasps {
        for preset in 1..=WIDTH_PRESETS {
            let dexterous = lift_to_dexterous(g, table, preset)?;
            let camera_distance = (dexterous.pose.t - camera.pose.t).norm();
            out.push(GraspCandidate {
                dexterous,
                source: *g,
                preset,
                camera_distance,
                collision_free: true,
            });
        }
    }
    Ok(out)
}

/// Keep candidates whose posed hand proxies intersect neither the object
/// body nor the ground plane. The functional part itself is exempt: the
/// fingers are supposed to close around it.
pub fn filter_collisions(
    robot: &RobotModel,
    cands: Vec<GraspCandidate>,
    state: &SceneState,
) -> Vec<GraspCandidate> {
    let body = state.object.body_shapes();
    cands
        .into_iter()
        .filter_map(|mut cand| {
            let (frames, _) = robot.fk_hand(cand.dexterous.pose, &cand.dexterous.hand_config);
            let hand = robot.hand_shapes_from(cand.dexterous.pose, &frames);
            let hit = hand
                .iter()
                .any(|h| h.min_z() < 0.0 || body.iter().any(|b| h.intersects(b)));
            if hit {
                None
            } else {
                cand.collision_free = true;
                Some(cand)
            }
        })
        .collect()
}

/// The collision-free candidate closest to the camera; ties go to the
/// lowest preset id, then input order.
pub fn select_grasp(cands: &[GraspCandidate], camera: &CameraModel) -> Result<GraspCandidate> {
    let mut best: Option<(f64, usize)> = None;
    for (i, cand) in cands.iter().enumerate() {
        if !cand.collision_free {
            continue;
        }
        let d = (cand.dexterous.pose.t - camera.pose.t).norm();
        let better = match best {
            None => true,
            Some((bd, bi)) => match d.total_cmp(&bd) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => cand.preset < cands[bi].preset,
            },
        };
        if better {
            best = Some((d, i));
        }
    }
    let (d, i) = best.ok_or(Error::NoValidGrasp)?;
    let mut chosen = cands[i].clone();
    chosen.camera_distance = d;
    Ok(chosen)
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

const IK_ITERS: usize = 200;
const IK_DAMPING: f64 = 0.05;
const IK_POS_TOL: f64 = 1.0e-3;
const IK_ROT_TOL: f64 = 1.0e-2;

/// One damped-least-squares descent; `Err` carries the final residual.
fn dls_descend(
    robot: &RobotModel,
    target: &Pose,
    limits: &[(f64, f64)],
    mut q: [f64; crate::scene::DOF],
) -> std::result::Result<[f64; ARM_DOF], (f64, f64)> {
    let mut residual = (f64::INFINITY, f64::INFINITY);
    for _ in 0..=IK_ITERS {
        let fk = robot.fk_unchecked(&q);
        let v = target.t - fk.palm.t;
        let w = target.rot.compose(fk.palm.rot.inverse()).scaled_axis();
        residual = (v.norm(), w.norm());
        if residual.0 < IK_POS_TOL && residual.1 < IK_ROT_TOL {
            let mut out = [0.0; ARM_DOF];
            out.copy_from_slice(&q[..ARM_DOF]);
            return Ok(out);
        }
        let vs = clamp_norm(v, 0.2);
        let ws = clamp_norm(w, 1.0);
        let e = [vs.x, vs.y, vs.z, ws.x, ws.y, ws.z];
        let jac = robot.arm_jacobian(&fk);
        let dq = dls_solve(&jac, &e, IK_DAMPING);
        for i in 0..ARM_DOF {
            q[i] = (q[i] + dq[i].clamp(-0.5, 0.5)).clamp(limits[i].0, limits[i].1);
        }
    }
    Err(residual)
}

const IK_RESTARTS: usize = 64;

/// Damped-least-squares IK for the arm: palm pose target, limits clamped
/// every iteration, up to 200 iterations per descent, FK-verified result
/// or an error. Descends from `q_init` first, then from elbow postures
/// aimed at the target, then from a fixed pseudorandom start sequence so
/// folded configurations outside every forward basin are still found.
pub fn ik_solve(
    robot: &RobotModel,
    target: &Pose,
    q_init: &[f64; ARM_DOF],
) -> Result<[f64; ARM_DOF]> {
    let limits = joint_limits(robot);
    let mut first = robot.home_q;
    first[..ARM_DOF].copy_from_slice(q_init);
    let yaw = target.t.y.atan2(target.t.x);
    let aimed = |arm: [f64; 5]| {
        let mut q = robot.home_q;
        q[0] = yaw;
        q[1..ARM_DOF].copy_from_slice(&arm);
        q
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let starts = [
        first,
        aimed([0.55, 0.95, 0.0, 1.65, 0.0]),
        aimed([1.0, 0.4, 0.0, 0.9, 0.0]),
        aimed([0.1, 1.4, 0.0, 0.5, 0.0]),
        aimed([0.55, 0.95, half_pi, 1.65, -half_pi]),
        aimed([0.8, 0.6, -half_pi, -1.0, half_pi]),
    ];
    let mut residual = (f64::INFINITY, f64::INFINITY);
    let track = |r: (f64, f64), best: &mut (f64, f64)| {
        if r.0 + r.1 < best.0 + best.1 {
            *best = r;
        }
    };
    for mut start in starts {
        for i in 0..ARM_DOF {
            start[i] = start[i].clamp(limits[i].0, limits[i].1);
        }
        match dls_descend(robot, target, &limits, start) {
            Ok(q) => return Ok(q),
            Err(r) => track(r, &mut residual),
        }
    }
    let mut restart = substream(0, "ik-restart", 0);
    for _ in 0..IK_RESTARTS {
        let mut q = robot.home_q;
        for i in 0..ARM_DOF {
            q[i] = restart.gen_range(limits[i].0..limits[i].1);
        }
        match dls_descend(robot, target, &limits, q) {
            Ok(q) => return Ok(q),
            Err(r) => track(r, &mut residual),
        }
    }
    Err(Error::Unreachable(format!(
        "best residual {:.2e} m / {:.2e} rad after {} iterations",
        residual.0, residual.1, IK_ITERS
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOneStats {
    pub grasps: usize,
    pub candidates: usize,
    pub collision_free: usize,
}

#[derive(Debug, Clone)]
pub struct StageOneResult {
    pub chosen: GraspCandidate,
    pub q_arm: [f64; ARM_DOF],
    pub stats: StageOneStats,
}

/// Render → segment → sample → lift → filter → select → IK.
pub fn run_stage_one(
    robot: &RobotModel,
    state: &SceneState,
    labeler: &dyn PointLabeler,
    table: &WidthTable,
    camera: &CameraModel,
    render: &RenderConfig,
    k: usize,
    seed: u64,
) -> Result<StageOneResult> {
    let mut rng = substream(seed, "stage1", 0);
    let cloud = render_scene(robot, state, camera, render, false, false, &mut rng)?;
    let pf = segment_with(labeler, &cloud)?;
    let grasps = sample_two_finger_grasps(&pf, k, seed)?;
    let candidates = build_candidates(&grasps, table, camera)?;
    let n_candidates = candidates.len();
    let kept = filter_collisions(robot, candidates, state);
    let n_free = kept.len();
    let chosen = select_grasp(&kept, camera)?;
    let home: [f64; ARM_DOF] = robot.home_q[..ARM_DOF].try_into().expect("arm slice");
    let q_arm = ik_solve(robot, &chosen.dexterous.pose, &home)?;
    Ok(StageOneResult {
        chosen,
        q_arm,
        stats: StageOneStats {
            grasps: grasps.len(),
            candidates: n_candidates,
            collision_free: n_free,
        },
    })
}

/// Preset shape family: an abduction pattern plus a palm roll about the
/// approach axis or tilt about the closing axis.
struct PresetSpec {
    abduction: [f64; FINGERS],
    roll: f64,
    tilt: f64,
}

fn preset_specs() -> [PresetSpec; WIDTH_PRESETS] {
    let tilt = 25.0_f64.to_radians();
    [
        PresetSpec { abduction: [0.0; FINGERS], roll: 0.0, tilt: 0.0 },
        PresetSpec { abduction: [0.0; FINGERS], roll: std::f64::consts::PI, tilt: 0.0 },
        PresetSpec { abduction: [0.2, 0.0, -0.2, 0.0], roll: 0.0, tilt },
        PresetSpec { abduction: [-0.2, 0.0, 0.2, 0.0], roll: 0.0, tilt: -tilt },
    ]
}

/// Curl parametrization: proximal flexion = c, middle = 0.8c, distal =
/// 0.5c, clamped to limits; c < 0 splays the fingers open.
fn curl_config(robot: &RobotModel, abduction: &[f64; FINGERS], c: f64) -> [f64; HAND_DOF] {
    let mut b = [0.0; HAND_DOF];
    for (f, finger) in robot.fingers.iter().enumerate() {
        let angles = [abduction[f], c, 0.8 * c, 0.5 * c];
        for (k, joint) in finger.joints.iter().enumerate() {
            b[f * FINGER_JOINTS + k] = angles[k].clamp(joint.lo, joint.hi);
        }
    }
    b
}

/// Bisect the curl parameter until the fingertip gap hits `target`.
fn solve_curl(robot: &RobotModel, abduction: &[f64; FINGERS], target: f64) -> [f64; HAND_DOF] {
    let gap_at = |c: f64| {
        let b = curl_config(robot, abduction, c);
        hand_gap_midpoint(robot, Pose::IDENTITY, &b).0
    };
    let lo = robot.fingers.iter().map(|f| f.joints[1].lo).fold(f64::MIN, f64::max);
    let hi = robot.fingers.iter().map(|f| f.joints[1].hi).fold(f64::MAX, f64::min);
    let steps = 512;
    let mut best_c = lo;
    let mut best_err = f64::INFINITY;
    let mut prev_c = lo;
    let mut prev_gap = gap_at(lo);
    for t in 0..=steps {
        let c = lo + (hi - lo) * t as f64 / steps as f64;
        let gap = gap_at(c);
        if (gap - target).abs() < best_err {
            best_err = (gap - target).abs();
            best_c = c;
        }
        if t > 0 && (prev_gap - target) * (gap - target) <= 0.0 {
            let (mut a, mut fa, mut b2) = (prev_c, prev_gap, c);
            for _ in 0..80 {
                let m = 0.5 * (a + b2);
                let fm = gap_at(m);
                if (fa - target) * (fm - target) <= 0.0 {
                    b2 = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            let c_star = 0.5 * (a + b2);
            let err = (gap_at(c_star) - target).abs();
            if err < best_err {
                best_err = err;
                best_c = c_star;
            }
        }
        prev_c = c;
        prev_gap = gap;
    }
    curl_config(robot, abduction, best_c)
}

/// Solve one preset for one bin width and derive its palm offset: the
/// pose placing the fingertip closing line on the grasp x axis with the
/// midpoint at the origin, then rolled or tilted per the preset.
fn preset_entry(robot: &RobotModel, spec: &PresetSpec, width: f64) -> WidthPreset {
    let b = solve_curl(robot, &spec.abduction, width);
    let (_, tips) = robot.fk_hand(Pose::IDENTITY, &b);
    let mut centroid = Vec3::ZERO;
    for tip in tips.iter().take(THUMB) {
        centroid = centroid + *tip;
    }
    centroid = centroid * (1.0 / THUMB as f64);
    let midpoint = (tips[THUMB] + centroid) * 0.5;
    let closing = (centroid - tips[THUMB]).normalized().expect("closing axis");
    let residual = Vec3::Z - closing * closing.dot(Vec3::Z);
    let approach = residual.normalized().unwrap_or_else(|| closing.any_orthogonal());
    let frame = Rotation::from_cols(closing, approach.cross(closing), approach);
    let base = Pose::new(frame.inverse(), frame.inverse().apply(midpoint * -1.0));
    let extra = Rotation::from_axis_angle(Vec3::Z, spec.roll)
        .compose(Rotation::from_axis_angle(Vec3::X, spec.tilt));
    let offset = Pose::from_rotation(extra).compose(base);
    WidthPreset {
        hand_config: b.to_vec(),
        palm_offset: PoseRecord::from_pose(&offset),
    }
}

/// Regenerate the full width table for a hand model. The shipped JSON
/// file is the output of this function for the default robot.
pub fn author_width_table(robot: &RobotModel) -> WidthTable {
    let specs = preset_specs();
    let bins = (0..WIDTH_BINS)
        .map(|i| {
            let width = W_MAX * (i as f64 + 0.5) / WIDTH_BINS as f64;
            WidthBin {
                width,
                presets: specs.iter().map(|s| preset_entry(robot, s, width)).collect(),
            }
        })
        .collect();
    WidthTable {
        schema_version: WIDTH_TABLE_SCHEMA_VERSION,
        n_bins: WIDTH_BINS,
        w_max: W_MAX,
        bins,
    }
}
