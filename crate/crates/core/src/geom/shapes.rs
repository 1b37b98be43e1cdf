use super::{vec3, Pose, Vec3};
use serde::{Deserialize, Serialize};

/// Ball with positive radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec3, radius: f64) -> Sphere {
        assert!(center.is_finite() && radius > 0.0, "invalid sphere");
        Sphere { center, radius }
    }
}

/// Segment from `a` to `b` swept by a ball of positive radius.
///
/// `a == b` is allowed and degenerates to a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Capsule {
        assert!(a.is_finite() && b.is_finite() && radius > 0.0, "invalid capsule");
        Capsule { a, b, radius }
    }
}

/// Collision primitive used for every piece of scene geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sphere(Sphere),
    Capsule(Capsule),
}

/// Closest point on segment `ab` to point `p`.
pub fn closest_point_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom < 1.0e-18 {
        return a;
    }
    let t = ((p - a).dot(ab) / denom).clamp(0.0, 1.0);
    a + ab * t
}

/// Minimum distance between segments `p1q1` and `p2q2` (Ericson 5.1.9).
pub fn segment_segment_distance(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(r);
    let (mut s, mut t);
    if a < 1.0e-18 && e < 1.0e-18 {
        return r.norm();
    }
    if a < 1.0e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e < 1.0e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            s = if denom > 1.0e-18 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

impl Shape {
    pub fn radius(&self) -> f64 {
        match self {
            Shape::Sphere(s) => s.radius,
            Shape::Capsule(c) => c.radius,
        }
    }

    /// Core segment endpoints (equal for spheres).
    pub fn core(&self) -> (Vec3, Vec3) {
        match self {
            Shape::Sphere(s) => (s.center, s.center),
            Shape::Capsule(c) => (c.a, c.b),
        }
    }

    /// Minimum distance between the two core segments.
    pub fn core_distance(&self, other: &Shape) -> f64 {
        let (a1, b1) = self.core();
        let (a2, b2) = other.core();
        segment_segment_distance(a1, b1, a2, b2)
    }

    /// Signed surface separation: negative when the shapes overlap.
    pub fn surface_distance(&self, other: &Shape) -> f64 {
        self.core_distance(other) - self.radius() - other.radius()
    }

    /// True when the surfaces overlap.
    pub fn intersects(&self, other: &Shape) -> bool {
        self.surface_distance(other) < 0.0
    }

    /// Signed distance from a point to the surface (negative inside).
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        let (a, b) = self.core();
        (p - closest_point_on_segment(p, a, b)).norm() - self.radius()
    }

    /// Closest surface point to `p` and the outward normal there.
    pub fn closest_surface_point(&self, p: Vec3) -> (Vec3, Vec3) {
        let (a, b) = self.core();
        let cp = closest_point_on_segment(p, a, b);
        let dir = (p - cp).normalized().unwrap_or_else(|| {
            // Point on the core: pick a direction orthogonal to the axis.
            match (b - a).normalized() {
                Some(axis) => axis.any_orthogonal(),
                None => Vec3::Z,
            }
        });
        (cp + dir * self.radius(), dir)
    }

    /// Shape expressed in the parent frame of `pose`.
    pub fn transformed(&self, pose: Pose) -> Shape {
        match self {
            Shape::Sphere(s) => Shape::Sphere(Sphere {
                center: pose.transform_point(s.center),
                radius: s.radius,
            }),
            Shape::Capsule(c) => Shape::Capsule(Capsule {
                a: pose.transform_point(c.a),
                b: pose.transform_point(c.b),
                radius: c.radius,
            }),
        }
    }

    /// Lowest z reached by the surface.
    pub fn min_z(&self) -> f64 {
        let (a, b) = self.core();
        a.z.min(b.z) - self.radius()
    }

    /// Surface area (used to spread render samples across shapes).
    pub fn area(&self) -> f64 {
        match self {
            Shape::Sphere(s) => 4.0 * std::f64::consts::PI * s.radius * s.radius,
            Shape::Capsule(c) => {
                let h = (c.b - c.a).norm();
                let r = c.radius;
                4.0 * std::f64::consts::PI * r * r
                    + 2.0 * std::f64::consts::PI * r * h
            }
        }
    }
}

/// Sphere helper constructor.
pub fn sphere(center: Vec3, radius: f64) -> Shape {
    Shape::Sphere(Sphere::new(center, radius))
}

/// Capsule helper constructor.
pub fn capsule(a: Vec3, b: Vec3, radius: f64) -> Shape {
    Shape::Capsule(Capsule::new(a, b, radius))
}

/// Axis-aligned capsule along z, convenience for object geometry.
pub fn capsule_z(x: f64, y: f64, z0: f64, z1: f64, radius: f64) -> Shape {
    capsule(vec3(x, y, z0), vec3(x, y, z1), radius)
}
