//! Rigid-body math: vectors, rotations, poses, and collision primitives.
//!
//! Rotations are unit quaternions kept in a canonical form (`w >= 0`,
//! renormalized after every product), so equal rotations have equal
//! components. All types are plain `Copy` data; constructors panic on
//! non-finite or degenerate input since those are programming errors, not
//! runtime conditions.

mod shapes;

pub use shapes::{
    capsule, capsule_z, closest_point_on_segment, segment_segment_distance, sphere, Capsule,
    Shape, Sphere,
};

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Three-component vector / point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);
    pub const X: Vec3 = vec3(1.0, 0.0, 0.0);
    pub const Y: Vec3 = vec3(0.0, 1.0, 0.0);
    pub const Z: Vec3 = vec3(0.0, 0.0, 1.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or `None` when shorter than `1e-12`.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n < 1.0e-12 {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthogonal(self) -> Vec3 {
        let trial = if self.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        self.cross(trial).normalized().expect("non-zero input")
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        vec3(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion in canonical form (`w >= 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "QuatRepr", into = "QuatRepr")]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
struct QuatRepr {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl From<QuatRepr> for Rotation {
    fn from(q: QuatRepr) -> Rotation {
        Rotation::from_quat(q.w, q.x, q.y, q.z)
    }
}

impl From<Rotation> for QuatRepr {
    fn from(r: Rotation) -> QuatRepr {
        QuatRepr { w: r.w, x: r.x, y: r.y, z: r.z }
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalized, canonicalized quaternion. Panics on a near-zero norm.
    pub fn from_quat(w: f64, x: f64, y: f64, z: f64) -> Rotation {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        assert!(n.is_finite() && n > 1.0e-9, "degenerate quaternion");
        let s = if w < 0.0 { -1.0 / n } else { 1.0 / n };
        Rotation { w: w * s, x: x * s, y: y * s, z: z * s }
    }

    /// Rotation of `angle` radians about `axis` (any non-zero length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Rotation {
        let u = axis.normalized().expect("zero rotation axis");
        let (s, c) = (0.5 * angle).sin_cos();
        Rotation::from_quat(c, u.x * s, u.y * s, u.z * s)
    }

    /// Rotation whose axis is `v / |v|` and angle `|v|`; identity near zero.
    pub fn from_scaled_axis(v: Vec3) -> Rotation {
        let angle = v.norm();
        if angle < 1.0e-12 {
            Rotation::IDENTITY
        } else {
            Rotation::from_axis_angle(v, angle)
        }
    }

    /// Rotation from an orthonormal right-handed basis given as columns.
    pub fn from_cols(cx: Vec3, cy: Vec3, cz: Vec3) -> Rotation {
        let m = [[cx.x, cy.x, cz.x], [cx.y, cy.y, cz.y], [cx.z, cy.z, cz.z]];
        Rotation::from_matrix(m)
    }

    /// Rotation from a 3x3 rotation matrix (Shepperd's method).
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Rotation {
        let tr = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z);
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            w = (m[2][1] - m[1][2]) / s;
            x = 0.25 * s;
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = 0.25 * s;
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = 0.25 * s;
        }
        Rotation::from_quat(w, x, y, z)
    }

    /// Orientation whose +z axis points along `forward`, with +x chosen
    /// orthogonal to `up`. Panics if `forward` is zero or parallel to `up`.
    pub fn look_along(forward: Vec3, up: Vec3) -> Rotation {
        let z = forward.normalized().expect("zero forward");
        let x = up.cross(z).normalized().expect("forward parallel to up");
        let y = z.cross(x);
        Rotation::from_cols(x, y, z)
    }

    pub fn quat(self) -> (f64, f64, f64, f64) {
        (self.w, self.x, self.y, self.z)
    }

    /// Rotate a vector.
    pub fn apply(self, v: Vec3) -> Vec3 {
        let q = vec3(self.x, self.y, self.z);
        let t = q.cross(v) * 2.0;
        v + t * self.w + q.cross(t)
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(self, o: Rotation) -> Rotation {
        Rotation::from_quat(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn inverse(self) -> Rotation {
        Rotation { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Column of the rotation matrix: the image of the i-th basis vector.
    pub fn col(self, i: usize) -> Vec3 {
        let m = self.to_matrix();
        vec3(m[0][i], m[1][i], m[2][i])
    }

    /// Rotation angle in [0, pi].
    pub fn angle(self) -> f64 {
        // atan2 form stays accurate near zero where acos(w) loses digits.
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * v.atan2(self.w)
    }

    /// Axis-angle vector (axis scaled by angle); zero for the identity.
    pub fn scaled_axis(self) -> Vec3 {
        let angle = self.angle();
        match vec3(self.x, self.y, self.z).normalized() {
            Some(axis) => axis * angle,
            None => Vec3::ZERO,
        }
    }
}

/// Geodesic distance between two rotations, in radians, range [0, pi].
pub fn rotation_distance(a: Rotation, b: Rotation) -> f64 {
    // atan2 form stays accurate near zero where acos(dot) loses digits.
    let r = a.inverse().compose(b);
    let v = (r.x * r.x + r.y * r.y + r.z * r.z).sqrt();
    2.0 * v.atan2(r.w.abs())
}

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rot: Rotation,
    pub t: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { rot: Rotation::IDENTITY, t: Vec3::ZERO };

    pub fn new(rot: Rotation, t: Vec3) -> Pose {
        assert!(t.is_finite(), "non-finite translation");
        Pose { rot, t }
    }

    pub fn from_translation(t: Vec3) -> Pose {
        Pose::new(Rotation::IDENTITY, t)
    }

    pub fn from_rotation(rot: Rotation) -> Pose {
        Pose { rot, t: Vec3::ZERO }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(self, o: Pose) -> Pose {
        Pose {
            rot: self.rot.compose(o.rot),
            t: self.rot.apply(o.t) + self.t,
        }
    }

    pub fn inverse(self) -> Pose {
        let inv = self.rot.inverse();
        Pose { rot: inv, t: -inv.apply(self.t) }
    }

    pub fn transform_point(self, p: Vec3) -> Vec3 {
        self.rot.apply(p) + self.t
    }

    pub fn transform_vector(self, v: Vec3) -> Vec3 {
        self.rot.apply(v)
    }

    /// Homogeneous 4x4 matrix, row-major.
    pub fn to_matrix4(self) -> [[f64; 4]; 4] {
        let m = self.rot.to_matrix();
        [
            [m[0][0], m[0][1], m[0][2], self.t.x],
            [m[1][0], m[1][1], m[1][2], self.t.y],
            [m[2][0], m[2][1], m[2][2], self.t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Combined pose error: translation norm plus `kappa` times geodesic angle.
pub fn pose_delta_norm(a: Pose, b: Pose, kappa: f64) -> f64 {
    (a.t - b.t).norm() + kappa * rotation_distance(a.rot, b.rot)
}

/// Smallest-eigenvalue eigenvector of a symmetric 3x3 matrix (Jacobi sweeps).
///
/// Used for plane fitting in normal estimation; ties return an arbitrary
/// member of the tied eigenspace.
pub fn symmetric_eigen_min(mut a: [[f64; 3]; 3]) -> Vec3 {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..32 {
        // Largest off-diagonal element.
        let (mut p, mut q, mut max) = (0, 1, a[0][1].abs());
        if a[0][2].abs() > max {
            p = 0;
            q = 2;
            max = a[0][2].abs();
        }
        if a[1][2].abs() > max {
            p = 1;
            q = 2;
            max = a[1][2].abs();
        }
        if max < 1.0e-14 {
            break;
        }
        let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for k in 0..3 {
            let (akp, akq) = (a[k][p], a[k][q]);
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
        }
        for k in 0..3 {
            let (apk, aqk) = (a[p][k], a[q][k]);
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
        }
        for r in v.iter_mut() {
            let (vp, vq) = (r[p], r[q]);
            r[p] = c * vp - s * vq;
            r[q] = s * vp + c * vq;
        }
    }
    let mut idx = 0;
    for i in 1..3 {
        if a[i][i] < a[idx][idx] {
            idx = i;
        }
    }
    vec3(v[0][idx], v[1][idx], v[2][idx])
        .normalized()
        .expect("eigenvector")
}
