//! Fixed-base 6R arm with a four-finger, 16-DoF hand.
//!
//! The joint vector has 22 entries: arm joints 0..6, then four fingers
//! (index, middle, ring, thumb) with four joints each in the order
//! abduction, proximal, middle, distal flexion. Flexion axes point along
//! local -y so positive angles curl a finger toward the opposing digit.
//! Fingertip positions are the chain end points, placed at the contact pad
//! so a tip touching a surface reports distance zero.

use crate::error::Error;
use crate::geom::{capsule, vec3, Capsule, Pose, Rotation, Shape, Vec3};
use crate::Result;

pub const ARM_DOF: usize = 6;
pub const HAND_DOF: usize = 16;
pub const DOF: usize = ARM_DOF + HAND_DOF;
pub const FINGERS: usize = 4;
pub const FINGER_JOINTS: usize = 4;
/// Index of the thumb in finger arrays.
pub const THUMB: usize = 3;

/// One revolute joint: fixed offset from the parent frame, then a rotation
/// about `axis` by the joint coordinate.
#[derive(Debug, Clone, Copy)]
pub struct JointSpec {
    pub pre: Pose,
    pub axis: Vec3,
    pub lo: f64,
    pub hi: f64,
    pub vmax: f64,
}

impl JointSpec {
    fn new(pre: Vec3, axis: Vec3, lo: f64, hi: f64, vmax: f64) -> JointSpec {
        JointSpec {
            pre: Pose::from_translation(pre),
            axis,
            lo,
            hi,
            vmax,
        }
    }
}

/// One finger: mount pose on the palm, four joints, link capsules for the
/// three phalanges, and the tip point at the end of the distal link.
#[derive(Debug, Clone)]
pub struct FingerSpec {
    pub mount: Pose,
    pub joints: [JointSpec; FINGER_JOINTS],
    pub links: [Capsule; 3],
    pub tip: Vec3,
}

/// Kinematic and collision model of the robot.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub arm: [JointSpec; ARM_DOF],
    pub arm_links: [Capsule; ARM_DOF],
    pub palm_offset: Pose,
    pub palm_link: Capsule,
    pub fingers: [FingerSpec; FINGERS],
    pub home_q: [f64; DOF],
}

/// Joint limit pair for external consumers.
pub fn joint_limits(robot: &RobotModel) -> [(f64, f64); DOF] {
    let mut out = [(0.0, 0.0); DOF];
    for (i, j) in robot.arm.iter().enumerate() {
        out[i] = (j.lo, j.hi);
    }
    for (f, finger) in robot.fingers.iter().enumerate() {
        for (k, j) in finger.joints.iter().enumerate() {
            out[ARM_DOF + f * FINGER_JOINTS + k] = (j.lo, j.hi);
        }
    }
    out
}

/// Forward-kinematics result: every link frame plus derived points.
#[derive(Debug, Clone)]
pub struct FkResult {
    /// Frame after each arm joint's rotation.
    pub arm_frames: [Pose; ARM_DOF],
    pub palm: Pose,
    /// Frame after each finger joint's rotation.
    pub finger_frames: [[Pose; FINGER_JOINTS]; FINGERS],
    /// Chain end points, world frame: index, middle, ring, thumb.
    pub fingertips: [Vec3; FINGERS],
}

impl FkResult {
    /// Centroid of the three non-thumb fingertips.
    pub fn finger_centroid(&self) -> Vec3 {
        (self.fingertips[0] + self.fingertips[1] + self.fingertips[2]) / 3.0
    }

    /// Distance from the thumb tip to the non-thumb centroid: the hand
    /// analogue of a two-finger gripper opening.
    pub fn fingertip_gap(&self) -> f64 {
        (self.fingertips[THUMB] - self.finger_centroid()).norm()
    }
}

impl Default for RobotModel {
    fn default() -> RobotModel {
        let pi = std::f64::consts::PI;
        let arm = [
            JointSpec::new(vec3(0.0, 0.0, 0.267), Vec3::Z, -3.05, 3.05, 3.14),
            JointSpec::new(Vec3::ZERO, Vec3::Y, -2.09, 2.09, 3.14),
            JointSpec::new(vec3(0.0, 0.0, 0.29), Vec3::Y, -2.9, 2.9, 3.14),
            JointSpec::new(vec3(0.0, 0.0, 0.07), Vec3::Z, -3.05, 3.05, 3.14),
            JointSpec::new(vec3(0.0, 0.0, 0.23), Vec3::Y, -2.09, 2.09, 3.14),
            JointSpec::new(Vec3::ZERO, Vec3::Z, -3.05, 3.05, 3.14),
        ];
        let arm_links = [
            Capsule::new(vec3(0.0, 0.0, -0.20), Vec3::ZERO, 0.055),
            Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, 0.29), 0.05),
            Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, 0.07), 0.05),
            Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, 0.23), 0.045),
            Capsule::new(vec3(0.0, 0.0, -0.02), vec3(0.0, 0.0, 0.02), 0.045),
            Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, 0.107), 0.045),
        ];

        let finger = |mount_t: Vec3, mount_rot: Rotation, l1: f64, l2: f64, l3: f64, r: f64| {
            FingerSpec {
                mount: Pose::new(mount_rot, mount_t),
                joints: [
                    JointSpec::new(Vec3::ZERO, Vec3::X, -0.35, 0.35, 8.0),
                    JointSpec::new(Vec3::ZERO, -Vec3::Y, -0.3, 1.65, 8.0),
                    JointSpec::new(vec3(0.0, 0.0, l1), -Vec3::Y, -0.1, 1.75, 8.0),
                    JointSpec::new(vec3(0.0, 0.0, l2), -Vec3::Y, -0.1, 1.75, 8.0),
                ],
                links: [
                    Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, l1), r * 1.1),
                    Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, l2), r),
                    Capsule::new(Vec3::ZERO, vec3(0.0, 0.0, l3), r),
                ],
                tip: vec3(0.0, 0.0, l3),
            }
        };
        let fingers = [
            finger(vec3(0.035, -0.045, 0.02), Rotation::IDENTITY, 0.054, 0.0384, 0.0557, 0.010),
            finger(vec3(0.035, 0.0, 0.02), Rotation::IDENTITY, 0.054, 0.0384, 0.0557, 0.010),
            finger(vec3(0.035, 0.045, 0.02), Rotation::IDENTITY, 0.054, 0.0384, 0.0557, 0.010),
            finger(
                vec3(-0.035, 0.0, 0.010),
                Rotation::from_axis_angle(Vec3::Z, pi),
                0.058,
                0.045,
                0.055,
                0.011,
            ),
        ];

        let mut home_q = [0.0; DOF];
        home_q[..ARM_DOF].copy_from_slice(&[0.0, 0.55, 0.95, 0.0, 1.65, 0.0]);
        for f in 0..FINGERS {
            for k in 1..FINGER_JOINTS {
                home_q[ARM_DOF + f * FINGER_JOINTS + k] = 0.25;
            }
        }

        RobotModel {
            arm,
            arm_links,
            palm_offset: Pose::from_translation(vec3(0.0, 0.0, 0.107)),
            palm_link: Capsule::new(vec3(-0.01, -0.04, 0.005), vec3(-0.01, 0.04, 0.005), 0.028),
            fingers,
            home_q,
        }
    }
}

impl RobotModel {
    /// Canonical open-hand configuration used by non-prior start modes.
    pub fn open_hand(&self) -> [f64; HAND_DOF] {
        let mut b = [0.0; HAND_DOF];
        for f in 0..FINGERS {
            for k in 1..FINGER_JOINTS {
                b[f * FINGER_JOINTS + k] = 0.25;
            }
        }
        b
    }

    /// Validate a joint vector against the limits.
    pub fn check_limits(&self, q: &[f64; DOF]) -> Result<()> {
        let lim = joint_limits(self);
        for (i, (&qi, &(lo, hi))) in q.iter().zip(lim.iter()).enumerate() {
            if !qi.is_finite() || qi < lo - 1.0e-9 || qi > hi + 1.0e-9 {
                return Err(Error::JointLimit(format!("joint {i} at {qi}")));
            }
        }
        Ok(())
    }

    /// Clamp a joint vector into the limits.
    pub fn clamp_limits(&self, q: &mut [f64; DOF]) {
        let lim = joint_limits(self);
        for (qi, &(lo, hi)) in q.iter_mut().zip(lim.iter()) {
            *qi = qi.clamp(lo, hi);
        }
    }

    /// Full forward kinematics. Errors if `q` violates joint limits.
    pub fn fk(&self, q: &[f64; DOF]) -> Result<FkResult> {
        self.check_limits(q)?;
        Ok(self.fk_unchecked(q))
    }

    /// Forward kinematics without limit validation (internal integrators
    /// keep state within limits by construction).
    pub fn fk_unchecked(&self, q: &[f64; DOF]) -> FkResult {
        let mut frame = Pose::IDENTITY;
        let mut arm_frames = [Pose::IDENTITY; ARM_DOF];
        for (i, joint) in self.arm.iter().enumerate() {
            frame = frame
                .compose(joint.pre)
                .compose(Pose::from_rotation(Rotation::from_axis_angle(joint.axis, q[i])));
            arm_frames[i] = frame;
        }
        let palm = frame.compose(self.palm_offset);
        let (finger_frames, fingertips) = self.fk_hand(palm, q[ARM_DOF..].try_into().unwrap());
        FkResult { arm_frames, palm, finger_frames, fingertips }
    }

    /// Finger kinematics for a free-floating palm pose: used both by full
    /// FK and by grasp filtering, where candidate palm poses have no arm.
    pub fn fk_hand(
        &self,
        palm: Pose,
        b: &[f64; HAND_DOF],
    ) -> ([[Pose; FINGER_JOINTS]; FINGERS], [Vec3; FINGERS]) {
        let mut frames = [[Pose::IDENTITY; FINGER_JOINTS]; FINGERS];
        let mut tips = [Vec3::ZERO; FINGERS];
        for (f, finger) in self.fingers.iter().enumerate() {
            let mut frame = palm.compose(finger.mount);
            for (k, joint) in finger.joints.iter().enumerate() {
                frame = frame
                    .compose(joint.pre)
                    .compose(Pose::from_rotation(Rotation::from_axis_angle(
                        joint.axis,
                        b[f * FINGER_JOINTS + k],
                    )));
                frames[f][k] = frame;
            }
            tips[f] = frames[f][FINGER_JOINTS - 1].transform_point(finger.tip);
        }
        (frames, tips)
    }

    /// World-frame arm link capsules.
    pub fn arm_shapes(&self, fk: &FkResult) -> Vec<Shape> {
        self.arm_links
            .iter()
            .zip(fk.arm_frames.iter())
            .map(|(c, f)| capsule(c.a, c.b, c.radius).transformed(*f))
            .collect()
    }

    /// World-frame hand capsules: palm slab plus three per finger.
    pub fn hand_shapes_from(
        &self,
        palm: Pose,
        finger_frames: &[[Pose; FINGER_JOINTS]; FINGERS],
    ) -> Vec<Shape> {
        let mut out = Vec::with_capacity(1 + FINGERS * 3);
        out.push(
            capsule(self.palm_link.a, self.palm_link.b, self.palm_link.radius).transformed(palm),
        );
        for (f, finger) in self.fingers.iter().enumerate() {
            for (k, link) in finger.links.iter().enumerate() {
                // Link k hangs off the frame of flexion joint k (joints
                // 1..4); the abduction joint carries no link.
                let frame = finger_frames[f][k + 1];
                out.push(capsule(link.a, link.b, link.radius).transformed(frame));
            }
        }
        out
    }

    /// World-frame hand capsules for a full FK result.
    pub fn hand_shapes(&self, fk: &FkResult) -> Vec<Shape> {
        self.hand_shapes_from(fk.palm, &fk.finger_frames)
    }

    /// Geometric Jacobian of the palm frame with respect to the arm joints:
    /// rows are linear xyz then angular xyz, columns are joints.
    pub fn arm_jacobian(&self, fk: &FkResult) -> [[f64; ARM_DOF]; 6] {
        let p_ee = fk.palm.t;
        let mut jac = [[0.0; ARM_DOF]; 6];
        let mut parent = Pose::IDENTITY;
        for (i, joint) in self.arm.iter().enumerate() {
            let origin_frame = parent.compose(joint.pre);
            let axis_world = origin_frame.rot.apply(joint.axis);
            let origin = origin_frame.t;
            let lin = axis_world.cross(p_ee - origin);
            jac[0][i] = lin.x;
            jac[1][i] = lin.y;
            jac[2][i] = lin.z;
            jac[3][i] = axis_world.x;
            jac[4][i] = axis_world.y;
            jac[5][i] = axis_world.z;
            parent = fk.arm_frames[i];
        }
        jac
    }
}

/// Solve (J J^T + damping^2 I) y = e, then return J^T y: the damped
/// least-squares joint velocity for an end-effector twist `e` = [v; w].
pub fn dls_solve(jac: &[[f64; ARM_DOF]; 6], e: &[f64; 6], damping: f64) -> [f64; ARM_DOF] {
    let mut a = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let mut acc = 0.0;
            for l in 0..ARM_DOF {
                acc += jac[i][l] * jac[j][l];
            }
            a[i][j] = acc;
        }
        a[i][i] += damping * damping;
    }
    let y = solve6(a, *e);
    let mut dq = [0.0; ARM_DOF];
    for (l, dql) in dq.iter_mut().enumerate() {
        for i in 0..6 {
            *dql += jac[i][l] * y[i];
        }
    }
    dq
}

/// Gaussian elimination with partial pivoting for a 6x6 system.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> [f64; 6] {
    for col in 0..6 {
        let mut pivot = col;
        for r in col + 1..6 {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        if d.abs() < 1.0e-15 {
            continue; // damped matrix is PD in practice; keep going
        }
        for r in col + 1..6 {
            let f = a[r][col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..6 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for col in (0..6).rev() {
        let mut acc = b[col];
        for c in col + 1..6 {
            acc -= a[col][c] * x[c];
        }
        x[col] = if a[col][col].abs() < 1.0e-15 { 0.0 } else { acc / a[col][col] };
    }
    x
}
