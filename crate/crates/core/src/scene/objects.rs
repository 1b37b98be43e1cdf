//! Parametric articulated objects with a single joint each.
//!
//! Geometry is expressed as capsules in part-local frames so that sampled
//! surface patterns transform rigidly with the part. Each object exposes a
//! list of posed parts labeled functional or body; the articulation target
//! point `X` and part rotation `Y` live on the functional part and follow
//! it through the joint motion. Per-task parameters live in versioned JSON
//! files under `data/objects/`, embedded at build time.

use crate::error::Error;
use crate::geom::{Capsule, Pose, Rotation, Shape, Sphere, Vec3};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Point-cloud class labels shared across rendering and segmentation.
pub const LABEL_FUNCTIONAL: u8 = 0;
pub const LABEL_BODY: u8 = 1;
pub const LABEL_ARM: u8 = 2;
pub const LABEL_HAND: u8 = 3;
pub const NUM_LABELS: usize = 4;

/// Manipulation task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Bucket,
    Laptop,
    Faucet,
    Toilet,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Bucket,
        TaskKind::Laptop,
        TaskKind::Faucet,
        TaskKind::Toilet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Bucket => "bucket",
            TaskKind::Laptop => "laptop",
            TaskKind::Faucet => "faucet",
            TaskKind::Toilet => "toilet",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        TaskKind::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// Articulation of the functional part relative to the object base frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JointKind {
    /// Translation along `axis` (unit, base frame).
    Prismatic { axis: Vec3 },
    /// Rotation about the axis through `origin` (base frame).
    Revolute { origin: Vec3, axis: Vec3 },
}

/// One rigid piece of an object: shapes in the part frame plus its pose.
#[derive(Debug, Clone)]
pub struct Part {
    pub pose: Pose,
    pub shapes: Vec<Shape>,
    pub label: u8,
}

/// A single-joint articulated object instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArticulatedObject {
    pub task: TaskKind,
    /// Base frame in the world (table surface at z = 0).
    pub base: Pose,
    /// Uniform size multiplier applied to all length parameters.
    pub scale: f64,
    /// Articulation coordinate: meters for prismatic, radians for revolute.
    pub q: f64,
}

/// Per-task object description: the schema of the embedded JSON
/// parameter files. All lengths are meters at scale 1; shapes in the
/// `body_moving` and `functional` lists are authored in the part frame,
/// `body_static` in the base frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectParams {
    pub schema_version: u32,
    pub task: TaskKind,
    pub joint: JointKind,
    pub q_range: (f64, f64),
    pub q_start: f64,
    pub q_goal: f64,
    /// Uniform spawn-time size multiplier range.
    pub scale_range: (f64, f64),
    pub body_static: Vec<Shape>,
    pub body_moving: Vec<Shape>,
    pub functional: Vec<Shape>,
    /// Approach target on the functional surface, part frame.
    pub target_local: Vec3,
    /// Part frame origin in the base frame; equals the joint origin for
    /// revolute objects.
    pub part_origin: Vec3,
}

pub const OBJECT_SCHEMA_VERSION: u32 = 1;

impl ObjectParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schema_version != OBJECT_SCHEMA_VERSION {
            return fail(format!(
                "object schema_version {} != {}",
                self.schema_version, OBJECT_SCHEMA_VERSION
            ));
        }
        let (lo, hi) = self.q_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return fail(format!("bad q_range [{lo}, {hi}]"));
        }
        for (name, v) in [("q_start", self.q_start), ("q_goal", self.q_goal)] {
            if !(v >= lo && v <= hi) {
                return fail(format!("{name} {v} outside q_range"));
            }
        }
        if self.q_start == self.q_goal {
            return fail("q_start equals q_goal".into());
        }
        let (slo, shi) = self.scale_range;
        if !(slo.is_finite() && shi.is_finite() && 0.0 < slo && slo <= shi) {
            return fail(format!("bad scale_range [{slo}, {shi}]"));
        }
        let axis = match self.joint {
            JointKind::Prismatic { axis } => axis,
            JointKind::Revolute { origin, axis } => {
                if !origin.is_finite() {
                    return fail("non-finite joint origin".into());
                }
                axis
            }
        };
        if !axis.is_finite() || (axis.norm() - 1.0).abs() > 1.0e-9 {
            return fail("joint axis must be unit length".into());
        }
        if self.functional.is_empty() {
            return fail("no functional shapes".into());
        }
        for shape in self
            .body_static
            .iter()
            .chain(&self.body_moving)
            .chain(&self.functional)
        {
            let ok = match shape {
                Shape::Sphere(s) => s.center.is_finite() && s.radius > 0.0 && s.radius.is_finite(),
                Shape::Capsule(c) => {
                    c.a.is_finite() && c.b.is_finite() && c.radius > 0.0 && c.radius.is_finite()
                }
            };
            if !ok {
                return fail("invalid shape".into());
            }
        }
        if !(self.target_local.is_finite() && self.part_origin.is_finite()) {
            return fail("non-finite target or part origin".into());
        }
        let on_surface = self
            .functional
            .iter()
            .map(|s| s.signed_distance(self.target_local).abs())
            .fold(f64::INFINITY, f64::min);
        if on_surface > 1.0e-6 {
            return fail(format!("target {on_surface} m off the functional surface"));
        }
        Ok(())
    }

    /// Built-in parameters for `task`, parsed once from the embedded files.
    pub fn builtin(task: TaskKind) -> &'static ObjectParams {
        static CACHE: OnceLock<[ObjectParams; 4]> = OnceLock::new();
        let all = CACHE.get_or_init(|| {
            [
                include_str!("../../data/objects/bucket.json"),
                include_str!("../../data/objects/laptop.json"),
                include_str!("../../data/objects/faucet.json"),
                include_str!("../../data/objects/toilet.json"),
            ]
            .map(|text| {
                let p: ObjectParams = serde_json::from_str(text).expect("embedded object params");
                p.validate().expect("embedded object params");
                p
            })
        });
        let p = &all[TaskKind::ALL.iter().position(|&t| t == task).unwrap()];
        assert_eq!(p.task, task, "parameter file order");
        p
    }
}

struct TaskGeometry {
    joint: JointKind,
    q_range: (f64, f64),
    q_start: f64,
    q_goal: f64,
    body_static: Vec<Shape>,
    body_moving: Vec<Shape>,
    functional: Vec<Shape>,
    target_local: Vec3,
    part_origin: Vec3,
}

fn scale_shape(shape: &Shape, s: f64) -> Shape {
    match shape {
        Shape::Sphere(sp) => Shape::Sphere(Sphere { center: sp.center * s, radius: sp.radius * s }),
        Shape::Capsule(c) => {
            Shape::Capsule(Capsule { a: c.a * s, b: c.b * s, radius: c.radius * s })
        }
    }
}

/// Task geometry at size multiplier `s`. Lengths scale; articulation
/// coordinates do not (the bucket goal height is a task constant).
fn geometry(task: TaskKind, s: f64) -> TaskGeometry {
    let p = ObjectParams::builtin(task);
    TaskGeometry {
        joint: match p.joint {
            JointKind::Prismatic { axis } => JointKind::Prismatic { axis },
            JointKind::Revolute { origin, axis } => {
                JointKind::Revolute { origin: origin * s, axis }
            }
        },
        q_range: p.q_range,
        q_start: p.q_start,
        q_goal: p.q_goal,
        body_static: p.body_static.iter().map(|sh| scale_shape(sh, s)).collect(),
        body_moving: p.body_moving.iter().map(|sh| scale_shape(sh, s)).collect(),
        functional: p.functional.iter().map(|sh| scale_shape(sh, s)).collect(),
        target_local: p.target_local * s,
        part_origin: p.part_origin * s,
    }
}

impl ArticulatedObject {
    pub fn new(task: TaskKind, base: Pose, scale: f64) -> ArticulatedObject {
        assert!(scale > 0.0, "non-positive scale");
        let q = geometry(task, scale).q_start;
        ArticulatedObject { task, base, scale, q }
    }

    pub fn joint_local(&self) -> JointKind {
        geometry(self.task, self.scale).joint
    }

    /// Joint parameters expressed in the world frame.
    pub fn joint_world(&self) -> JointKind {
        match self.joint_local() {
            JointKind::Prismatic { axis } => JointKind::Prismatic {
                axis: self.base.rot.apply(axis),
            },
            JointKind::Revolute { origin, axis } => JointKind::Revolute {
                origin: self.base.transform_point(origin),
                axis: self.base.rot.apply(axis),
            },
        }
    }

    pub fn q_range(&self) -> (f64, f64) {
        geometry(self.task, self.scale).q_range
    }

    pub fn q_start(&self) -> f64 {
        geometry(self.task, self.scale).q_start
    }

    pub fn q_goal(&self) -> f64 {
        geometry(self.task, self.scale).q_goal
    }

    /// Pose of the functional part frame at articulation `q`, world frame.
    pub fn functional_pose_at(&self, q: f64) -> Pose {
        let g = geometry(self.task, self.scale);
        let local = match g.joint {
            JointKind::Prismatic { axis } => Pose::from_translation(axis * q),
            JointKind::Revolute { origin, axis } => {
                // Rotate about the axis through `origin`; the part frame
                // origin coincides with the joint origin.
                let _ = origin;
                Pose::from_rotation(Rotation::from_axis_angle(axis, q))
            }
        };
        self.base
            .compose(Pose::from_translation(g.part_origin))
            .compose(local)
    }

    pub fn functional_pose(&self) -> Pose {
        self.functional_pose_at(self.q)
    }

    /// All rigid parts at the current articulation.
    pub fn parts(&self) -> Vec<Part> {
        let g = geometry(self.task, self.scale);
        let fpose = self.functional_pose();
        let mut out = Vec::with_capacity(3);
        if !g.body_static.is_empty() {
            out.push(Part { pose: self.base, shapes: g.body_static, label: LABEL_BODY });
        }
        if !g.body_moving.is_empty() {
            out.push(Part { pose: fpose, shapes: g.body_moving, label: LABEL_BODY });
        }
        out.push(Part { pose: fpose, shapes: g.functional, label: LABEL_FUNCTIONAL });
        out
    }

    /// World-frame functional shapes at the current articulation.
    pub fn functional_shapes(&self) -> Vec<Shape> {
        let g = geometry(self.task, self.scale);
        let fpose = self.functional_pose();
        g.functional.iter().map(|s| s.transformed(fpose)).collect()
    }

    /// World-frame non-functional shapes at the current articulation.
    pub fn body_shapes(&self) -> Vec<Shape> {
        let g = geometry(self.task, self.scale);
        let fpose = self.functional_pose();
        let mut out: Vec<Shape> = g
            .body_static
            .iter()
            .map(|s| s.transformed(self.base))
            .collect();
        out.extend(g.body_moving.iter().map(|s| s.transformed(fpose)));
        out
    }

    /// Approach target on the functional surface at articulation `q`.
    pub fn target_point_at(&self, q: f64) -> Vec3 {
        let g = geometry(self.task, self.scale);
        self.functional_pose_at(q).transform_point(g.target_local)
    }

    /// Current approach target `X`.
    pub fn target_point(&self) -> Vec3 {
        self.target_point_at(self.q)
    }

    /// Current functional part rotation `Y`.
    pub fn target_rotation(&self) -> Rotation {
        self.functional_pose().rot
    }

    /// Functional part rotation at articulation `q`.
    pub fn target_rotation_at(&self, q: f64) -> Rotation {
        self.functional_pose_at(q).rot
    }

    /// Completion fraction: 0 at `q_start`, 1 at `q_goal`, clamped.
    pub fn progress(&self) -> f64 {
        let g = geometry(self.task, self.scale);
        ((self.q - g.q_start) / (g.q_goal - g.q_start)).clamp(0.0, 1.0)
    }

    /// Clamp the articulation coordinate into its range.
    pub fn clamp_q(&mut self) {
        let (lo, hi) = self.q_range();
        self.q = self.q.clamp(lo, hi);
    }
}
