//! Pinhole-style camera: pose plus a rectangular field of view.

use crate::geom::{Pose, Rotation, Vec3};
use serde::{Deserialize, Serialize};

/// Which pipeline stage a camera serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraRole {
    /// Stage-one view used for segmentation and grasp selection.
    Initial,
    /// Observation view used during policy rollouts.
    Rl,
}

/// Camera frame: +z looks forward, +x right, +y down (z cross x).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraModel {
    pub pose: Pose,
    pub hfov: f64,
    pub vfov: f64,
    pub role: CameraRole,
    pub znear: f64,
}

impl CameraModel {
    /// Stage-one camera: front-left of the workspace, looking down at it.
    pub fn default_initial() -> CameraModel {
        CameraModel::look_at(
            Vec3 { x: 0.9, y: 0.35, z: 0.75 },
            Vec3 { x: 0.5, y: 0.0, z: 0.15 },
            CameraRole::Initial,
            1.2,
            1.0,
        )
    }

    /// Rollout camera: front-right, high enough to keep arm and object in
    /// frame through a manipulation.
    pub fn default_rl() -> CameraModel {
        CameraModel::look_at(
            Vec3 { x: 1.0, y: -0.4, z: 0.9 },
            Vec3 { x: 0.45, y: 0.0, z: 0.2 },
            CameraRole::Rl,
            1.2,
            1.0,
        )
    }

    /// Camera at `eye` looking toward `target`, world +z as the up hint.
    pub fn look_at(eye: Vec3, target: Vec3, role: CameraRole, hfov: f64, vfov: f64) -> CameraModel {
        assert!(hfov > 0.0 && hfov < std::f64::consts::PI, "bad hfov");
        assert!(vfov > 0.0 && vfov < std::f64::consts::PI, "bad vfov");
        let rot = Rotation::look_along(target - eye, Vec3::Z);
        CameraModel { pose: Pose::new(rot, eye), hfov, vfov, role, znear: 0.05 }
    }

    pub fn eye(&self) -> Vec3 {
        self.pose.t
    }

    /// True when a world point lies inside the viewing frustum.
    pub fn contains(&self, p: Vec3) -> bool {
        let c = self.pose.inverse().transform_point(p);
        c.z > self.znear
            && c.x.abs() <= c.z * (0.5 * self.hfov).tan()
            && c.y.abs() <= c.z * (0.5 * self.vfov).tan()
    }
}
