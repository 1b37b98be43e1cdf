//! Point-cloud rendering: deterministic surface sampling, visibility
//! culling, hidden-point removal, sensor noise, and fixed-size downsampling.
//!
//! Surface patterns are Fibonacci spirals generated in each shape's local
//! frame, so a rigidly transformed scene yields the rigidly transformed
//! cloud. Occlusion uses the spherical-flip hidden-point-removal operator:
//! points are inverted about a large sphere centered on the camera and the
//! convex hull of the flipped set (plus the camera origin) marks the
//! visible ones. The operator is approximate and errs permissive for large
//! flip radii, which suits a desk-scale scene.

use super::camera::CameraModel;
use crate::error::Error;
use crate::geom::{vec3, Pose, Shape, Vec3};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Rendered cloud; labels are per-point classes when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub labels: Option<Vec<u8>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One rigid piece to render: a local-frame shape, its pose, and a label.
#[derive(Debug, Clone)]
pub struct RenderItem {
    pub shape: Shape,
    pub pose: Pose,
    pub label: u8,
}

/// Rendering knobs.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Output cloud size.
    pub n_points: usize,
    /// Surface samples drawn before culling.
    pub raw_budget: usize,
    /// Per-axis Gaussian noise, meters.
    pub noise_sigma: f64,
    /// Flip-sphere radius as a multiple of the visible extent.
    pub hpr_radius_factor: f64,
}

impl Default for RenderConfig {
    fn default() -> RenderConfig {
        RenderConfig {
            n_points: 512,
            raw_budget: 768,
            noise_sigma: 0.002,
            hpr_radius_factor: 1.0e3,
        }
    }
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Deterministic surface samples (point, outward normal) in shape-local
/// coordinates. Sample counts follow surface area.
fn sample_shape_surface(shape: &Shape, n: usize, out: &mut Vec<(Vec3, Vec3)>) {
    match shape {
        Shape::Sphere(s) => {
            for i in 0..n {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = i as f64 * GOLDEN_ANGLE;
                let dir = vec3(r * phi.cos(), r * phi.sin(), z);
                out.push((s.center + dir * s.radius, dir));
            }
        }
        Shape::Capsule(c) => {
            let axis = c.b - c.a;
            let h = axis.norm();
            let u = axis.normalized().unwrap_or(Vec3::Z);
            let e1 = u.any_orthogonal();
            let e2 = u.cross(e1);
            let r = c.radius;
            let area_cyl = std::f64::consts::TAU * r * h;
            let area_caps = 4.0 * std::f64::consts::PI * r * r;
            let n_cyl = ((n as f64) * area_cyl / (area_cyl + area_caps)).round() as usize;
            let n_cap = (n - n_cyl.min(n)) / 2;
            for i in 0..n_cyl {
                let t = (i as f64 + 0.5) / n_cyl as f64;
                let phi = i as f64 * GOLDEN_ANGLE;
                let radial = e1 * phi.cos() + e2 * phi.sin();
                out.push((c.a + u * (t * h) + radial * r, radial));
            }
            // Hemispherical caps at both ends, oriented along -u and +u.
            for (center, sign) in [(c.a, -1.0), (c.b, 1.0)] {
                for i in 0..n_cap {
                    let z = (i as f64 + 0.5) / n_cap as f64;
                    let rr = (1.0 - z * z).sqrt();
                    let phi = i as f64 * GOLDEN_ANGLE + sign;
                    let dir = e1 * (rr * phi.cos()) + e2 * (rr * phi.sin()) + u * (z * sign);
                    out.push((center + dir * r, dir));
                }
            }
        }
    }
}

/// Spherical-flip hidden point removal. `points` are camera-relative;
/// returns a visibility flag per point.
fn hidden_point_removal(points: &[Vec3], radius_factor: f64) -> Vec<bool> {
    let n = points.len();
    if n <= 3 {
        return vec![true; n];
    }
    // Rotation-invariant extent (twice the circumradius about the centroid)
    // keeps the flip sphere, and hence visibility, equivariant.
    let mut centroid = Vec3::ZERO;
    for p in points {
        centroid = centroid + *p;
    }
    let centroid = centroid * (1.0 / n as f64);
    let mut r_max = 0.0f64;
    for p in points {
        r_max = r_max.max((*p - centroid).norm());
    }
    let diameter = (2.0 * r_max).max(1.0e-6);
    let big_r = radius_factor * diameter;
    let mut flipped: Vec<Vec3> = points
        .iter()
        .map(|&p| {
            let d = p.norm();
            match p.normalized() {
                Some(dir) => dir * (2.0 * big_r - d),
                None => p,
            }
        })
        .collect();
    flipped.push(Vec3::ZERO); // camera origin participates in the hull
    let on_hull = convex_hull_vertices(&flipped);
    on_hull[..n].to_vec()
}

/// Indices of convex hull vertices via quickhull with face adjacency.
/// Degenerate inputs (all collinear or coplanar within tolerance)
/// conservatively report every point on the hull, which renders them all
/// visible downstream.
pub fn convex_hull_vertices(points: &[Vec3]) -> Vec<bool> {
    let n = points.len();
    let mut on_hull = vec![false; n];
    if n <= 4 {
        on_hull.iter_mut().for_each(|v| *v = true);
        return on_hull;
    }
    let mut scale = 0.0f64;
    for p in points {
        scale = scale.max(p.x.abs()).max(p.y.abs()).max(p.z.abs());
    }
    let eps = 1.0e-10 * scale.max(1.0e-12);

    // Initial simplex from extreme points.
    let mut i0 = 0;
    let mut i1 = 0;
    for d in 0..3 {
        let key = |p: Vec3| [p.x, p.y, p.z][d];
        let lo = (0..n).min_by(|&a, &b| key(points[a]).total_cmp(&key(points[b]))).unwrap();
        let hi = (0..n).max_by(|&a, &b| key(points[a]).total_cmp(&key(points[b]))).unwrap();
        if points[lo].distance(points[hi]) > points[i0].distance(points[i1]) {
            i0 = lo;
            i1 = hi;
        }
    }
    if points[i0].distance(points[i1]) < eps {
        on_hull.iter_mut().for_each(|v| *v = true);
        return on_hull;
    }
    let dir = (points[i1] - points[i0]).normalized().unwrap();
    let i2 = (0..n)
        .max_by(|&a, &b| {
            let da = (points[a] - points[i0]).cross(dir).norm();
            let db = (points[b] - points[i0]).cross(dir).norm();
            da.total_cmp(&db)
        })
        .unwrap();
    if (points[i2] - points[i0]).cross(dir).norm() < eps {
        on_hull.iter_mut().for_each(|v| *v = true);
        return on_hull;
    }
    let plane_n = (points[i1] - points[i0])
        .cross(points[i2] - points[i0])
        .normalized()
        .unwrap();
    let i3 = (0..n)
        .max_by(|&a, &b| {
            let da = (points[a] - points[i0]).dot(plane_n).abs();
            let db = (points[b] - points[i0]).dot(plane_n).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    if (points[i3] - points[i0]).dot(plane_n).abs() < eps {
        on_hull.iter_mut().for_each(|v| *v = true);
        return on_hull;
    }

    // Faces keep their outward plane, conflict list, and the neighbor
    // across each directed edge (v[i], v[i+1]).
    struct Face {
        v: [usize; 3],
        normal: Vec3,
        offset: f64,
        outside: Vec<usize>,
        nbr: [usize; 3],
        alive: bool,
    }

    impl Face {
        fn edge(&self, i: usize) -> (usize, usize) {
            (self.v[i], self.v[(i + 1) % 3])
        }
    }

    let plane = |a: usize, b: usize, c: usize| -> (Vec3, f64) {
        let normal = (points[b] - points[a])
            .cross(points[c] - points[a])
            .normalized()
            .unwrap_or(Vec3::Z);
        (normal, normal.dot(points[a]))
    };

    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) * 0.25;
    let mut faces: Vec<Face> = Vec::with_capacity(2 * n);
    for [a, b, c] in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let (mut v, (mut normal, mut offset)) = ([a, b, c], plane(a, b, c));
        if normal.dot(interior) > offset {
            v.swap(1, 2);
            let p = plane(v[0], v[1], v[2]);
            normal = p.0;
            offset = p.1;
        }
        faces.push(Face { v, normal, offset, outside: Vec::new(), nbr: [0; 3], alive: true });
    }
    // Tetrahedron adjacency by brute-force edge matching.
    for fi in 0..4 {
        for i in 0..3 {
            let (a, b) = faces[fi].edge(i);
            for gi in 0..4 {
                if gi == fi {
                    continue;
                }
                for j in 0..3 {
                    let (c, d) = faces[gi].edge(j);
                    if (c, d) == (b, a) {
                        faces[fi].nbr[i] = gi;
                    }
                }
            }
        }
    }

    let dist = |f: &Face, p: Vec3| f.normal.dot(p) - f.offset;

    // Conflict lists: each point sits on the face it is farthest above.
    for idx in 0..n {
        if idx == i0 || idx == i1 || idx == i2 || idx == i3 {
            continue;
        }
        let mut best = eps;
        let mut best_face = usize::MAX;
        for (fi, f) in faces.iter().enumerate() {
            let d = dist(f, points[idx]);
            if d > best {
                best = d;
                best_face = fi;
            }
        }
        if best_face != usize::MAX {
            faces[best_face].outside.push(idx);
        }
    }

    let mut stack: Vec<usize> = (0..4).filter(|&f| !faces[f].outside.is_empty()).collect();
    let mut mark = vec![false; 4]; // visible marker, grown with faces
    while let Some(fi) = stack.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| dist(&faces[fi], points[a]).total_cmp(&dist(&faces[fi], points[b])))
            .unwrap();
        let apex_p = points[apex];

        // Flood-fill the visible region; horizon edges are crossings from a
        // visible face to a hidden one, directed as in the visible face.
        mark.fill(false);
        mark.resize(faces.len(), false);
        let mut visible = vec![fi];
        mark[fi] = true;
        let mut horizon: Vec<(usize, usize, usize)> = Vec::new(); // (a, b, hidden face)
        let mut cursor = 0;
        while cursor < visible.len() {
            let g = visible[cursor];
            cursor += 1;
            for i in 0..3 {
                let h = faces[g].nbr[i];
                if mark[h] {
                    continue;
                }
                if dist(&faces[h], apex_p) > eps {
                    mark[h] = true;
                    visible.push(h);
                } else {
                    let (a, b) = faces[g].edge(i);
                    horizon.push((a, b, h));
                }
            }
        }

        let mut orphans = Vec::new();
        for &gi in &visible {
            faces[gi].alive = false;
            orphans.append(&mut faces[gi].outside);
        }

        // One new face per horizon edge, keeping the visible-side winding.
        let first_new = faces.len();
        for &(a, b, hidden) in &horizon {
            let (normal, offset) = plane(a, b, apex);
            let id = faces.len();
            faces.push(Face {
                v: [a, b, apex],
                normal,
                offset,
                outside: Vec::new(),
                nbr: [hidden, usize::MAX, usize::MAX],
                alive: true,
            });
            // Rewire the hidden face's slot that pointed into the region.
            for j in 0..3 {
                let (c, d) = faces[hidden].edge(j);
                if (c, d) == (b, a) {
                    faces[hidden].nbr[j] = id;
                }
            }
        }
        // Apex edges pair consecutive horizon faces: edge (b, apex) of the
        // face built on (a, b) meets edge (apex, b) of the one starting at b.
        for (k, &(_, b, _)) in horizon.iter().enumerate() {
            let id = first_new + k;
            let succ = horizon
                .iter()
                .position(|&(s, _, _)| s == b)
                .expect("closed horizon loop");
            faces[id].nbr[1] = first_new + succ; // edge (b, apex)
            faces[first_new + succ].nbr[2] = id; // edge (apex, b)
        }

        for o in orphans {
            if o == apex {
                continue;
            }
            let mut best = eps;
            let mut best_face = usize::MAX;
            for gi in first_new..faces.len() {
                let d = dist(&faces[gi], points[o]);
                if d > best {
                    best = d;
                    best_face = gi;
                }
            }
            if best_face != usize::MAX {
                faces[best_face].outside.push(o);
            }
        }
        for gi in first_new..faces.len() {
            if !faces[gi].outside.is_empty() {
                stack.push(gi);
            }
        }
    }

    for f in faces.iter().filter(|f| f.alive) {
        for &v in &f.v {
            on_hull[v] = true;
        }
    }
    on_hull
}

/// Render a labeled or unlabeled cloud of exactly `cfg.n_points` points.
///
/// Pipeline: per-shape surface sampling, back-face and frustum culling,
/// hidden-point removal, Gaussian noise, uniform downsampling (with
/// replacement when fewer points survive than requested). Errors with
/// [`Error::EmptyView`] when nothing survives culling.
pub fn render_pointcloud(
    items: &[RenderItem],
    camera: &CameraModel,
    cfg: &RenderConfig,
    labeled: bool,
    rng: &mut ChaCha8Rng,
) -> Result<PointCloud> {
    assert!(cfg.n_points > 0 && cfg.raw_budget > 0, "invalid render config");
    let total_area: f64 = items.iter().map(|it| it.shape.area()).sum();
    assert!(total_area > 0.0, "no renderable geometry");

    let eye = camera.eye();
    let cam_inv = camera.pose.inverse();
    let tan_h = (0.5 * camera.hfov).tan();
    let tan_v = (0.5 * camera.vfov).tan();

    let mut local = Vec::with_capacity(cfg.raw_budget + items.len() * 8);
    let mut world: Vec<(Vec3, u8)> = Vec::with_capacity(cfg.raw_budget);
    let mut cam_rel: Vec<Vec3> = Vec::with_capacity(cfg.raw_budget);
    for it in items {
        let share = it.shape.area() / total_area;
        let n = ((cfg.raw_budget as f64 * share).round() as usize).max(6);
        local.clear();
        sample_shape_surface(&it.shape, n, &mut local);
        for &(p, nrm) in &local {
            let wp = it.pose.transform_point(p);
            let wn = it.pose.rot.apply(nrm);
            if wn.dot(eye - wp) <= 1.0e-12 {
                continue; // back-facing
            }
            let c = cam_inv.transform_point(wp);
            if c.z <= camera.znear || c.x.abs() > c.z * tan_h || c.y.abs() > c.z * tan_v {
                continue; // outside frustum
            }
            world.push((wp, it.label));
            cam_rel.push(wp - eye);
        }
    }
    if world.is_empty() {
        return Err(Error::EmptyView);
    }

    let visible = hidden_point_removal(&cam_rel, cfg.hpr_radius_factor);
    let mut kept: Vec<(Vec3, u8)> = world
        .into_iter()
        .zip(visible)
        .filter_map(|(w, v)| v.then_some(w))
        .collect();

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma >= 0");
        for (p, _) in kept.iter_mut() {
            *p = *p
                + vec3(
                    normal.sample(rng),
                    normal.sample(rng),
                    normal.sample(rng),
                );
        }
    }

    // Uniform downsample to the exact output size.
    let m = kept.len();
    let mut picked: Vec<(Vec3, u8)> = Vec::with_capacity(cfg.n_points);
    if m >= cfg.n_points {
        let mut idx: Vec<usize> = (0..m).collect();
        for i in 0..cfg.n_points {
            let j = rng.gen_range(i..m);
            idx.swap(i, j);
            picked.push(kept[idx[i]]);
        }
    } else {
        picked.extend_from_slice(&kept);
        for _ in m..cfg.n_points {
            picked.push(kept[rng.gen_range(0..m)]);
        }
    }

    let labels = labeled.then(|| picked.iter().map(|&(_, l)| l).collect());
    Ok(PointCloud { points: picked.into_iter().map(|(p, _)| p).collect(), labels })
}
