//! Scene assembly and kinematic stepping.
//!
//! A scene is one articulated object on a table (z = 0) plus the robot at
//! the world origin. Object dynamics are contact-attachment: the
//! articulation follows the palm only while the hand closes around the
//! functional part, mimicking a friction-dominated joint that holds its
//! position otherwise.

mod camera;
mod objects;
mod render;
mod robot;

pub use camera::{CameraModel, CameraRole};
pub use objects::{
    ArticulatedObject, JointKind, ObjectParams, Part, TaskKind, LABEL_ARM, LABEL_BODY,
    LABEL_FUNCTIONAL, LABEL_HAND, NUM_LABELS, OBJECT_SCHEMA_VERSION,
};
pub use render::{
    convex_hull_vertices, render_pointcloud, PointCloud, RenderConfig, RenderItem,
};
pub use robot::{
    dls_solve, joint_limits, FingerSpec, FkResult, JointSpec, RobotModel, ARM_DOF, DOF, FINGERS,
    FINGER_JOINTS, HAND_DOF, THUMB,
};

use crate::error::Error;
use crate::geom::{vec3, Pose, Rotation, Shape, Vec3};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fingertip-to-surface distance below which a tip counts as in contact.
pub const ATTACH_RADIUS: f64 = 0.015;

/// Rectangular spawn region on the table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Workspace {
    fn default() -> Workspace {
        Workspace { x_min: 0.38, x_max: 0.62, y_min: -0.12, y_max: 0.12 }
    }
}

impl Workspace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.y_min.is_finite()
            && self.y_max.is_finite()
            && self.x_min < self.x_max
            && self.y_min < self.y_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidWorkspace(format!(
                "x [{}, {}], y [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )))
        }
    }

    pub fn center(&self) -> Vec3 {
        vec3(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            0.0,
        )
    }

    /// Region grown by `factor` in each linear dimension about its center.
    pub fn scaled(&self, factor: f64) -> Workspace {
        let c = self.center();
        Workspace {
            x_min: c.x + (self.x_min - c.x) * factor,
            x_max: c.x + (self.x_max - c.x) * factor,
            y_min: c.y + (self.y_min - c.y) * factor,
            y_max: c.y + (self.y_max - c.y) * factor,
        }
    }
}

/// Full kinematic state of one scene.
#[derive(Debug, Clone)]
pub struct SceneState {
    /// Joint positions: arm then hand.
    pub q: [f64; DOF],
    /// Joint velocities, same layout.
    pub qdot: [f64; DOF],
    pub object: ArticulatedObject,
    /// True while the hand closure engages the object joint.
    pub attached: bool,
    /// Control steps taken this episode.
    pub h_c: u32,
    /// Elapsed sim time, seconds.
    pub elapsed: f64,
}

/// Integration and control constants for [`step`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepParams {
    /// Control period, seconds (50 Hz).
    pub dt_control: f64,
    /// Physics substeps per control step.
    pub substeps: usize,
    /// Hand PD proportional gain.
    pub kp: f64,
    /// Hand PD derivative gain.
    pub kd: f64,
    /// Damping for the velocity-level arm solve.
    pub ik_damping: f64,
    /// Hand joint speed clamp, rad/s.
    pub hand_vmax: f64,
}

impl Default for StepParams {
    fn default() -> StepParams {
        StepParams {
            dt_control: 0.02,
            substeps: 5,
            kp: 20.0,
            kd: 1.0,
            ik_damping: 0.05,
            hand_vmax: 12.0,
        }
    }
}

/// Per-step diagnostics from [`step`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StepOutcome {
    /// Inputs were rejected (non-finite command or failed velocity solve).
    pub ik_failed: bool,
    /// Arm links intersecting the object, 0 to [`ARM_DOF`].
    pub collisions: u32,
}

/// Number of size variants each task ships; ascending scales, split 3:2
/// into train ids {0, 1, 2} and test ids {3, 4}.
pub const N_VARIANTS: usize = 5;

/// The task's variant scales: bin centers of its scale range.
pub fn variant_scales(task: TaskKind) -> [f64; N_VARIANTS] {
    let (lo, hi) = ObjectParams::builtin(task).scale_range;
    let w = (hi - lo) / N_VARIANTS as f64;
    std::array::from_fn(|i| lo + (i as f64 + 0.5) * w)
}

/// Training variants as (id, scale) pairs.
pub fn train_variants(task: TaskKind) -> Vec<(usize, f64)> {
    variant_scales(task).into_iter().enumerate().take(3).collect()
}

/// Held-out variants as (id, scale) pairs.
pub fn test_variants(task: TaskKind) -> Vec<(usize, f64)> {
    variant_scales(task).into_iter().enumerate().skip(3).collect()
}

/// Place one object uniformly in the workspace with a uniform yaw, sized
/// by `scale_override` or drawn uniformly from its configured range.
///
/// The articulation starts at `q_start`, or uniformly over its range when
/// `randomize_articulation` is set (used for dataset generation).
pub fn spawn_scene(
    robot: &RobotModel,
    task: TaskKind,
    workspace: &Workspace,
    scale_override: Option<f64>,
    randomize_articulation: bool,
    rng: &mut ChaCha8Rng,
) -> Result<SceneState> {
    workspace.validate()?;
    let x = rng.gen_range(workspace.x_min..workspace.x_max);
    let y = rng.gen_range(workspace.y_min..workspace.y_max);
    let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
    let scale = match scale_override {
        Some(s) => {
            assert!(s > 0.0 && s.is_finite(), "bad scale {s}");
            s
        }
        None => {
            let (slo, shi) = ObjectParams::builtin(task).scale_range;
            if shi > slo {
                rng.gen_range(slo..shi)
            } else {
                slo
            }
        }
    };
    let base = Pose::new(Rotation::from_axis_angle(Vec3::Z, yaw), vec3(x, y, 0.0));
    let mut object = ArticulatedObject::new(task, base, scale);
    if randomize_articulation {
        let (lo, hi) = object.q_range();
        object.q = rng.gen_range(lo..hi);
    }
    Ok(SceneState {
        q: robot.home_q,
        qdot: [0.0; DOF],
        object,
        attached: false,
        h_c: 0,
        elapsed: 0.0,
    })
}

/// Closure test of the attachment model: at least two fingertips within
/// [`ATTACH_RADIUS`] of the functional surface, with the direction from
/// the contact centroid to the palm opposing the outward surface normal
/// at the centroid (the palm wraps the part rather than resting on it).
/// Returns the contact centroid when engaged.
fn grasp_closure(tips: &[Vec3; FINGERS], palm: Vec3, functional: &[Shape]) -> Option<Vec3> {
    let mut centroid = Vec3::ZERO;
    let mut near = 0;
    for &tip in tips {
        let d = functional
            .iter()
            .map(|s| s.signed_distance(tip))
            .fold(f64::INFINITY, f64::min);
        if d <= ATTACH_RADIUS {
            centroid = centroid + tip;
            near += 1;
        }
    }
    if near < 2 {
        return None;
    }
    centroid = centroid / near as f64;
    let nearest = functional
        .iter()
        .min_by(|a, b| a.signed_distance(centroid).total_cmp(&b.signed_distance(centroid)))
        .expect("nonempty functional");
    let (_, normal) = nearest.closest_surface_point(centroid);
    let to_palm = (palm - centroid).normalized()?;
    (to_palm.dot(normal) < 0.0).then_some(centroid)
}

/// Articulation displacement equivalent to a palm translation `dp` applied
/// at the grasp centroid.
fn project_displacement(object: &ArticulatedObject, centroid: Vec3, dp: Vec3) -> f64 {
    match object.joint_world() {
        JointKind::Prismatic { axis } => dp.dot(axis),
        JointKind::Revolute { origin, axis } => {
            let tangent = axis.cross(centroid - origin);
            let n2 = tangent.norm_squared();
            if n2 < 1.0e-12 {
                0.0
            } else {
                dp.dot(tangent) / n2
            }
        }
    }
}

/// Advance the scene by one control step.
///
/// The arm tracks `twist` = [v; w] (palm linear and angular velocity)
/// through a damped least-squares velocity solve; hand joints run PD
/// control toward `hand_targets`. Both integrate over `params.substeps`
/// substeps. While attached, palm displacement projects onto the object's
/// articulation DoF. Non-finite commands reject the whole step: the state
/// is unchanged apart from the step counter and the flag is reported.
/// Pure function of its inputs.
pub fn step(
    robot: &RobotModel,
    state: &mut SceneState,
    twist: &[f64; 6],
    hand_targets: &[f64; HAND_DOF],
    params: &StepParams,
) -> StepOutcome {
    let mut outcome = StepOutcome::default();
    let dt = params.dt_control / params.substeps as f64;
    let limits = joint_limits(robot);

    state.h_c += 1;
    state.elapsed = state.h_c as f64 * params.dt_control;
    if !(twist.iter().all(|v| v.is_finite()) && hand_targets.iter().all(|v| v.is_finite())) {
        outcome.ik_failed = true;
        return outcome;
    }

    let mut fk = robot.fk_unchecked(&state.q);
    for _ in 0..params.substeps {
        let palm_prev = fk.palm.t;

        // Arm: damped least-squares joint velocities for the twist.
        let jac = robot.arm_jacobian(&fk);
        let mut dq = dls_solve(&jac, twist, params.ik_damping);
        if dq.iter().any(|v| !v.is_finite()) {
            dq = [0.0; ARM_DOF];
            outcome.ik_failed = true;
        }
        for i in 0..ARM_DOF {
            let v = dq[i].clamp(-robot.arm[i].vmax, robot.arm[i].vmax);
            state.qdot[i] = v;
            state.q[i] = (state.q[i] + v * dt).clamp(limits[i].0, limits[i].1);
        }

        // Hand: PD toward targets on a unit-inertia double integrator.
        for j in 0..HAND_DOF {
            let i = ARM_DOF + j;
            let err = hand_targets[j] - state.q[i];
            let acc = params.kp * err - params.kd * state.qdot[i];
            let v = (state.qdot[i] + acc * dt).clamp(-params.hand_vmax, params.hand_vmax);
            let q_new = state.q[i] + v * dt;
            if q_new <= limits[i].0 || q_new >= limits[i].1 {
                state.q[i] = q_new.clamp(limits[i].0, limits[i].1);
                state.qdot[i] = 0.0;
            } else {
                state.q[i] = q_new;
                state.qdot[i] = v;
            }
        }

        fk = robot.fk_unchecked(&state.q);

        // Object follows the palm while the closure holds.
        let functional = state.object.functional_shapes();
        let closure = grasp_closure(&fk.fingertips, fk.palm.t, &functional);
        if state.attached {
            if let Some(centroid) = closure {
                let dq_obj =
                    project_displacement(&state.object, centroid, fk.palm.t - palm_prev);
                state.object.q += dq_obj;
                state.object.clamp_q();
            }
        }
        state.attached = closure.is_some();
    }

    // Collision census for the restriction reward: arm links against the
    // object (hand links excluded by design).
    let mut object_shapes = state.object.body_shapes();
    object_shapes.extend(state.object.functional_shapes());
    for link in &robot.arm_shapes(&fk) {
        if object_shapes.iter().any(|b| link.intersects(b)) {
            outcome.collisions += 1;
        }
    }
    outcome
}

/// Completion fraction of the articulation, in [0, 1].
pub fn object_progress(state: &SceneState) -> f64 {
    state.object.progress()
}

/// True once the articulation reaches its goal coordinate.
pub fn is_success(state: &SceneState) -> bool {
    object_progress(state) >= 1.0 - 1.0e-12
}

/// Current functional-part target: approach point `X` and rotation `Y`.
pub fn functional_target(state: &SceneState) -> (Vec3, Rotation) {
    (state.object.target_point(), state.object.target_rotation())
}

/// Renderable pieces of the scene, object first, then optionally the robot.
pub fn scene_render_items(
    robot: &RobotModel,
    state: &SceneState,
    include_robot: bool,
) -> Vec<RenderItem> {
    let mut items = Vec::with_capacity(16);
    for part in state.object.parts() {
        for shape in part.shapes {
            items.push(RenderItem { shape, pose: part.pose, label: part.label });
        }
    }
    if include_robot {
        let fk = robot.fk_unchecked(&state.q);
        for (link, frame) in robot.arm_links.iter().zip(fk.arm_frames.iter()) {
            items.push(RenderItem {
                shape: Shape::Capsule(*link),
                pose: *frame,
                label: LABEL_ARM,
            });
        }
        items.push(RenderItem {
            shape: Shape::Capsule(robot.palm_link),
            pose: fk.palm,
            label: LABEL_HAND,
        });
        for (f, finger) in robot.fingers.iter().enumerate() {
            for (k, link) in finger.links.iter().enumerate() {
                items.push(RenderItem {
                    shape: Shape::Capsule(*link),
                    pose: fk.finger_frames[f][k + 1],
                    label: LABEL_HAND,
                });
            }
        }
    }
    items
}

/// Render the scene from `camera`. See [`render_pointcloud`].
pub fn render_scene(
    robot: &RobotModel,
    state: &SceneState,
    camera: &CameraModel,
    cfg: &RenderConfig,
    include_robot: bool,
    labeled: bool,
    rng: &mut ChaCha8Rng,
) -> Result<PointCloud> {
    let items = scene_render_items(robot, state, include_robot);
    render_pointcloud(&items, camera, cfg, labeled, rng)
}
