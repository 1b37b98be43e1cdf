//! Grasp-pipeline oracles: antipodal sampling on constructed geometry,
//! width-table FK verification, lift equivariance, brute-force collision
//! and selection rechecks, and IK round trips.

use dexprior::geom::{rotation_distance, vec3, Pose, Rotation, Vec3};
use dexprior::grasp::{
    author_width_table, build_candidates, estimate_normals, filter_collisions, ik_solve,
    lift_to_dexterous, map_width, run_stage_one, sample_two_finger_grasps, select_grasp,
    GraspCandidate, TwoFingerGrasp, WidthTable, WIDTH_BINS, WIDTH_PRESETS, W_MAX,
};
use dexprior::rng::substream;
use dexprior::scene::{
    spawn_scene, CameraModel, PointCloud, RenderConfig, RobotModel, SceneState, TaskKind,
    Workspace, ARM_DOF, HAND_DOF, THUMB,
};
use dexprior::segment::{NearestPartLabeler, PointLabeler};
use dexprior::Error;
use rand::Rng;

fn cloud(points: Vec<Vec3>) -> PointCloud {
    PointCloud { points, labels: None }
}

/// Two 5x5 planar patches facing each other across `gap` along x.
fn patch_pair(gap: f64) -> PointCloud {
    let mut pts = Vec::new();
    for &x in &[0.48, 0.48 + gap] {
        for iy in 0..5 {
            for iz in 0..5 {
                pts.push(vec3(
                    x,
                    -0.006 + 0.003 * iy as f64,
                    0.294 + 0.003 * iz as f64,
                ));
            }
        }
    }
    cloud(pts)
}

/// Near-uniform sphere surface samples.
fn sphere_cloud(n: usize, center: Vec3, r: f64) -> PointCloud {
    let golden = 2.399_963_229_728_653;
    let pts = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            center + vec3(rho * a.cos(), rho * a.sin(), z) * r
        })
        .collect();
    cloud(pts)
}

fn random_rotation(rng: &mut rand_chacha::ChaCha8Rng) -> Rotation {
    let axis = vec3(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    )
    .normalized()
    .unwrap_or(Vec3::Z);
    Rotation::from_axis_angle(axis, rng.gen_range(0.0..std::f64::consts::PI))
}

fn random_grasp(rng: &mut rand_chacha::ChaCha8Rng) -> TwoFingerGrasp {
    TwoFingerGrasp {
        pose: Pose::new(
            random_rotation(rng),
            vec3(
                rng.gen_range(0.3..0.7),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(0.1..0.5),
            ),
        ),
        width: rng.gen_range(0.005..0.109),
    }
}

fn grasp_bits(g: &TwoFingerGrasp) -> ([u64; 4], [u64; 3], u64) {
    let (w, x, y, z) = g.pose.rot.quat();
    (
        [w.to_bits(), x.to_bits(), y.to_bits(), z.to_bits()],
        [g.pose.t.x.to_bits(), g.pose.t.y.to_bits(), g.pose.t.z.to_bits()],
        g.width.to_bits(),
    )
}

fn fk_gap_and_midpoint(
    robot: &RobotModel,
    palm: Pose,
    b: &[f64; HAND_DOF],
) -> (f64, Vec3) {
    let (_, tips) = robot.fk_hand(palm, b);
    let mut centroid = Vec3::ZERO;
    for tip in tips.iter().take(THUMB) {
        centroid = centroid + *tip;
    }
    centroid = centroid * (1.0 / THUMB as f64);
    let gap = (tips[THUMB] - centroid).norm();
    (gap, (tips[THUMB] + centroid) * 0.5)
}

/// Brute-force collision verdict: any hand proxy against any body shape
/// or the ground plane.
fn collides(robot: &RobotModel, cand: &GraspCandidate, state: &SceneState) -> bool {
    let (frames, _) = robot.fk_hand(cand.dexterous.pose, &cand.dexterous.hand_config);
    let hand = robot.hand_shapes_from(cand.dexterous.pose, &frames);
    let body = state.object.body_shapes();
    hand.iter()
        .any(|h| h.min_z() < 0.0 || body.iter().any(|b| h.intersects(b)))
}

fn bucket_scene(seed: u64) -> SceneState {
    let robot = RobotModel::default();
    let mut rng = substream(seed, "spawn", 0);
    spawn_scene(&robot, TaskKind::Bucket, &Workspace::default(), None, true, &mut rng).unwrap()
}

#[test]
fn normals_recover_plane_orientation() {
    let mut pts = Vec::new();
    for ix in 0..8 {
        for iy in 0..8 {
            pts.push(vec3(0.4 + 0.01 * ix as f64, -0.04 + 0.01 * iy as f64, 0.3));
        }
    }
    let normals = estimate_normals(&pts);
    assert_eq!(normals.len(), pts.len());
    for n in &normals {
        assert!((n.norm() - 1.0).abs() < 1.0e-9);
        assert!(n.dot(Vec3::Z).abs() > 0.999, "normal {:?} not plane-aligned", n);
    }
}

#[test]
fn parallel_patches_yield_the_plate_width() {
    let pf = patch_pair(0.04);
    let grasps = sample_two_finger_grasps(&pf, 1000, 3).unwrap();
    assert!(!grasps.is_empty());
    for g in &grasps {
        assert!(
            (0.035..=0.045).contains(&g.width),
            "width {} outside plate tolerance",
            g.width
        );
        let closing = g.pose.rot.col(0);
        let approach = g.pose.rot.col(2);
        assert!(closing.dot(Vec3::X).abs() > 0.85);
        assert!((closing.norm() - 1.0).abs() < 1.0e-9);
        assert!(closing.dot(approach).abs() < 1.0e-9);
        assert!((approach.norm() - 1.0).abs() < 1.0e-9);
    }
}

#[test]
fn single_point_has_no_grasp() {
    let pf = cloud(vec![vec3(0.5, 0.0, 0.3)]);
    match sample_two_finger_grasps(&pf, 16, 0) {
        Err(Error::NoGraspFound) => {}
        other => panic!("expected NoGraspFound, got {:?}", other.map(|g| g.len())),
    }
}

#[test]
fn sampled_widths_stay_within_bounds() {
    let pf = sphere_cloud(400, vec3(0.5, 0.0, 0.3), 0.05);
    let grasps = sample_two_finger_grasps(&pf, 256, 9).unwrap();
    assert!(!grasps.is_empty());
    for g in &grasps {
        assert!(g.width > 0.0 && g.width <= W_MAX);
    }
}

#[test]
fn sampling_is_deterministic_in_seed() {
    let pf = sphere_cloud(300, vec3(0.5, 0.0, 0.3), 0.04);
    let a = sample_two_finger_grasps(&pf, 32, 11).unwrap();
    let b = sample_two_finger_grasps(&pf, 32, 11).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(grasp_bits(x), grasp_bits(y));
    }
}

#[test]
fn sampler_respects_the_candidate_cap() {
    let pf = sphere_cloud(300, vec3(0.5, 0.0, 0.3), 0.04);
    let grasps = sample_two_finger_grasps(&pf, 5, 2).unwrap();
    assert_eq!(grasps.len(), 5);
}

#[test]
fn builtin_width_table_is_fk_valid() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    table.validate(&robot).unwrap();
    assert_eq!(table.bins.len(), WIDTH_BINS);
    assert_eq!(table.w_max, W_MAX);
    let limits: Vec<(f64, f64)> = robot
        .fingers
        .iter()
        .flat_map(|f| f.joints.iter().map(|j| (j.lo, j.hi)))
        .collect();
    for (i, bin) in table.bins.iter().enumerate() {
        assert_eq!(bin.presets.len(), WIDTH_PRESETS);
        let lo = W_MAX * i as f64 / WIDTH_BINS as f64;
        let hi = W_MAX * (i + 1) as f64 / WIDTH_BINS as f64;
        assert!(bin.width > lo && bin.width < hi);
        for preset in &bin.presets {
            assert_eq!(preset.hand_config.len(), HAND_DOF);
            for (angle, (lo, hi)) in preset.hand_config.iter().zip(&limits) {
                assert!(*angle >= *lo - 1.0e-12 && *angle <= *hi + 1.0e-12);
            }
            let mut b = [0.0; HAND_DOF];
            b.copy_from_slice(&preset.hand_config);
            let (gap, mid) = fk_gap_and_midpoint(&robot, preset.palm_offset.to_pose(), &b);
            assert!(
                (gap - bin.width).abs() <= 0.01,
                "bin {} gap {} vs width {}",
                i,
                gap,
                bin.width
            );
            assert!(mid.norm() < 1.0e-9, "grasp midpoint drifted: {:?}", mid);
        }
    }
    for preset in &table.bins[0].presets {
        let mut b = [0.0; HAND_DOF];
        b.copy_from_slice(&preset.hand_config);
        let (gap, _) = fk_gap_and_midpoint(&robot, preset.palm_offset.to_pose(), &b);
        assert!(gap <= 0.01);
    }
}

#[test]
fn width_table_round_trips_through_json_and_regenerates() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let json = table.to_json();
    let back = WidthTable::from_json(&json).unwrap();
    assert_eq!(back, table);

    // Regeneration agrees to within libm cross-binary jitter.
    let authored = author_width_table(&robot);
    assert_eq!(authored.schema_version, table.schema_version);
    assert_eq!(authored.n_bins, table.n_bins);
    assert_eq!(authored.w_max.to_bits(), table.w_max.to_bits());
    assert_eq!(authored.bins.len(), table.bins.len());
    for (a, b) in authored.bins.iter().zip(&table.bins) {
        assert_eq!(a.width.to_bits(), b.width.to_bits());
        assert_eq!(a.presets.len(), b.presets.len());
        for (pa, pb) in a.presets.iter().zip(&b.presets) {
            for (x, y) in pa.hand_config.iter().zip(&pb.hand_config) {
                assert!((x - y).abs() < 1.0e-9);
            }
            for (x, y) in pa.palm_offset.quat.iter().zip(&pb.palm_offset.quat) {
                assert!((x - y).abs() < 1.0e-9);
            }
            for (x, y) in pa.palm_offset.t.iter().zip(&pb.palm_offset.t) {
                assert!((x - y).abs() < 1.0e-9);
            }
        }
    }
}

#[test]
fn width_table_rejects_corruption() {
    let robot = RobotModel::default();
    let mut table = WidthTable::builtin();
    table.bins[0].presets.pop();
    assert!(table.validate(&robot).is_err());

    let mut table = WidthTable::builtin();
    table.w_max = 0.2;
    assert!(table.validate(&robot).is_err());

    let mut table = WidthTable::builtin();
    table.bins[3].width += 0.05;
    assert!(table.validate(&robot).is_err());
}

#[test]
fn map_width_picks_boundary_bins() {
    let table = WidthTable::builtin();
    let first = map_width(&table, 0.0).unwrap();
    assert!(std::ptr::eq(first, &table.bins[0]));
    let last = map_width(&table, W_MAX).unwrap();
    assert!(std::ptr::eq(last, &table.bins[WIDTH_BINS - 1]));
    let step = W_MAX / WIDTH_BINS as f64;
    for i in 0..WIDTH_BINS {
        let inside = map_width(&table, (i as f64 + 0.5) * step).unwrap();
        assert!(std::ptr::eq(inside, &table.bins[i]));
    }
    assert!(matches!(map_width(&table, -1.0e-9), Err(Error::WidthOutOfRange(_))));
    assert!(matches!(map_width(&table, W_MAX + 1.0e-9), Err(Error::WidthOutOfRange(_))));
}

#[test]
fn map_width_is_piecewise_constant() {
    let table = WidthTable::builtin();
    let step = W_MAX / WIDTH_BINS as f64;
    let a = map_width(&table, 0.2 * step).unwrap();
    let b = map_width(&table, 0.8 * step).unwrap();
    assert!(std::ptr::eq(a, b));
    let c = map_width(&table, 1.2 * step).unwrap();
    assert!(!std::ptr::eq(a, c));
}

#[test]
fn lift_identity_pose_is_the_stored_offset() {
    let table = WidthTable::builtin();
    let g = TwoFingerGrasp { pose: Pose::IDENTITY, width: 0.05 };
    for preset in 1..=WIDTH_PRESETS {
        let dex = lift_to_dexterous(&g, &table, preset).unwrap();
        let bin = map_width(&table, g.width).unwrap();
        let offset = bin.presets[preset - 1].palm_offset.to_pose();
        assert!((dex.pose.t - offset.t).norm() < 1.0e-12);
        assert!(rotation_distance(dex.pose.rot, offset.rot) < 1.0e-12);
        assert_eq!(dex.hand_config.to_vec(), bin.presets[preset - 1].hand_config);
    }
}

#[test]
fn lift_is_equivariant_under_rigid_motion() {
    let table = WidthTable::builtin();
    let mut rng = substream(21, "equivariance", 0);
    for trial in 0..50 {
        let g = random_grasp(&mut rng);
        let t = Pose::new(
            random_rotation(&mut rng),
            vec3(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
        );
        let preset = 1 + trial % WIDTH_PRESETS;
        let moved = TwoFingerGrasp { pose: t.compose(g.pose), width: g.width };
        let a = lift_to_dexterous(&moved, &table, preset).unwrap();
        let b = lift_to_dexterous(&g, &table, preset).unwrap();
        let expected = t.compose(b.pose);
        assert!((a.pose.t - expected.t).norm() < 1.0e-9);
        assert!(rotation_distance(a.pose.rot, expected.rot) < 1.0e-9);
        assert_eq!(a.hand_config, b.hand_config);
    }
}

#[test]
fn lifted_fingertips_straddle_the_grasp_point() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let mut rng = substream(22, "roundtrip", 0);
    for trial in 0..200 {
        let g = random_grasp(&mut rng);
        let preset = 1 + trial % WIDTH_PRESETS;
        let dex = lift_to_dexterous(&g, &table, preset).unwrap();
        let (gap, mid) = fk_gap_and_midpoint(&robot, dex.pose, &dex.hand_config);
        assert!(
            (mid - g.pose.t).norm() < 0.02,
            "midpoint {:?} far from grasp point {:?}",
            mid,
            g.pose.t
        );
        let bin = map_width(&table, g.width).unwrap();
        assert!((gap - bin.width).abs() <= 0.01 + 1.0e-9);
    }
}

#[test]
fn lift_rejects_out_of_range_width() {
    let table = WidthTable::builtin();
    let g = TwoFingerGrasp { pose: Pose::IDENTITY, width: 0.2 };
    assert!(matches!(
        lift_to_dexterous(&g, &table, 1),
        Err(Error::WidthOutOfRange(_))
    ));
}

#[test]
fn filter_removes_embedded_and_keeps_clear_candidates() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let state = bucket_scene(5);
    let base = state.object.base.t;

    let embedded = TwoFingerGrasp {
        pose: Pose::from_translation(base + vec3(0.0, 0.0, 0.02)),
        width: 0.03,
    };
    let clear = TwoFingerGrasp {
        pose: Pose::from_translation(base + vec3(0.0, 0.0, 0.8)),
        width: 0.03,
    };
    let cands = build_candidates(&[embedded, clear], &table, &camera).unwrap();
    assert_eq!(cands.len(), 2 * WIDTH_PRESETS);
    let kept = filter_collisions(&robot, cands, &state);
    assert!(!kept.is_empty());
    for cand in &kept {
        assert!(cand.collision_free);
        assert!((cand.source.pose.t.z - (base.z + 0.8)).abs() < 1.0e-12);
        assert!(!collides(&robot, cand, &state));
    }
}

#[test]
fn filter_agrees_with_bruteforce_intersection() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let state = bucket_scene(8);
    let base = state.object.base.t;
    let mut rng = substream(31, "filter", 0);

    let grasps: Vec<TwoFingerGrasp> = (0..64)
        .map(|_| TwoFingerGrasp {
            pose: Pose::new(
                random_rotation(&mut rng),
                base + vec3(
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(0.02..0.5),
                ),
            ),
            width: rng.gen_range(0.01..0.1),
        })
        .collect();
    let cands = build_candidates(&grasps, &table, &camera).unwrap();
    let expected: Vec<bool> = cands.iter().map(|c| !collides(&robot, c, &state)).collect();
    let n_expected = expected.iter().filter(|&&v| v).count();
    let kept = filter_collisions(&robot, cands.clone(), &state);
    assert_eq!(kept.len(), n_expected);
    let mut cursor = kept.iter();
    for (cand, keep) in cands.iter().zip(&expected) {
        if *keep {
            let k = cursor.next().unwrap();
            assert_eq!(grasp_bits(&k.source), grasp_bits(&cand.source));
            assert_eq!(k.preset, cand.preset);
            assert!(k.collision_free);
        }
    }
}

#[test]
fn selection_minimizes_camera_distance_with_total_order_ties() {
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let eye = camera.pose.t;
    let make = |offset: Vec3, preset: usize| {
        let g = TwoFingerGrasp { pose: Pose::from_translation(eye + offset), width: 0.05 };
        let mut dex = lift_to_dexterous(&g, &table, preset).unwrap();
        dex.pose = g.pose;
        GraspCandidate {
            dexterous: dex,
            source: g,
            preset,
            camera_distance: offset.norm(),
            collision_free: true,
        }
    };

    let far = make(vec3(0.7, 0.0, 0.0), 1);
    let near_a = make(vec3(0.5, 0.0, 0.0), 3);
    let near_b = make(vec3(0.5, 0.0, 0.0), 1);
    let near_c = make(vec3(0.5, 0.0, 0.0), 1);

    let chosen = select_grasp(&[far.clone(), near_a.clone()], &camera).unwrap();
    assert_eq!(chosen.preset, 3);
    assert!((chosen.camera_distance - 0.5).abs() < 1.0e-12);

    let chosen = select_grasp(&[far.clone(), near_a.clone(), near_b.clone()], &camera).unwrap();
    assert_eq!(chosen.preset, 1);

    let mut tagged = near_c.clone();
    tagged.source.width = 0.051;
    let chosen = select_grasp(&[near_b.clone(), tagged.clone()], &camera).unwrap();
    assert_eq!(chosen.source.width.to_bits(), near_b.source.width.to_bits());

    let mut colliding = far.clone();
    colliding.collision_free = false;
    let mut masked = near_a.clone();
    masked.collision_free = false;
    assert!(matches!(
        select_grasp(&[colliding, masked], &camera),
        Err(Error::NoValidGrasp)
    ));
    assert!(matches!(select_grasp(&[], &camera), Err(Error::NoValidGrasp)));
}

#[test]
fn selection_equals_exhaustive_argmin() {
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let mut rng = substream(41, "argmin", 0);
    let grasps: Vec<TwoFingerGrasp> = (0..100).map(|_| random_grasp(&mut rng)).collect();
    let cands = build_candidates(&grasps, &table, &camera).unwrap();
    let chosen = select_grasp(&cands, &camera).unwrap();
    let best = cands
        .iter()
        .min_by(|a, b| {
            let da = (a.dexterous.pose.t - camera.pose.t).norm();
            let db = (b.dexterous.pose.t - camera.pose.t).norm();
            da.total_cmp(&db).then(a.preset.cmp(&b.preset))
        })
        .unwrap();
    assert_eq!(grasp_bits(&chosen.source), grasp_bits(&best.source));
    assert_eq!(chosen.preset, best.preset);
    let d = (chosen.dexterous.pose.t - camera.pose.t).norm();
    for cand in &cands {
        assert!(d <= (cand.dexterous.pose.t - camera.pose.t).norm() + 1.0e-15);
    }
}

#[test]
fn candidate_distances_match_the_camera() {
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let mut rng = substream(43, "dist", 0);
    let grasps: Vec<TwoFingerGrasp> = (0..20).map(|_| random_grasp(&mut rng)).collect();
    let cands = build_candidates(&grasps, &table, &camera).unwrap();
    assert_eq!(cands.len(), 20 * WIDTH_PRESETS);
    for cand in &cands {
        assert!(cand.camera_distance >= 0.0);
        let d = (cand.dexterous.pose.t - camera.pose.t).norm();
        assert!((cand.camera_distance - d).abs() < 1.0e-12);
    }
}

#[test]
fn ik_returns_the_fixed_point_immediately() {
    let robot = RobotModel::default();
    let home: [f64; ARM_DOF] = robot.home_q[..ARM_DOF].try_into().unwrap();
    let target = robot.fk_unchecked(&robot.home_q).palm;
    let q = ik_solve(&robot, &target, &home).unwrap();
    let mut full = robot.home_q;
    full[..ARM_DOF].copy_from_slice(&q);
    let palm = robot.fk_unchecked(&full).palm;
    assert!((palm.t - target.t).norm() < 1.0e-6);
    assert!(rotation_distance(palm.rot, target.rot) < 1.0e-6);
}

#[test]
fn ik_rejects_unreachable_targets() {
    let robot = RobotModel::default();
    let home: [f64; ARM_DOF] = robot.home_q[..ARM_DOF].try_into().unwrap();
    let target = Pose::from_translation(vec3(10.0, 0.0, 0.0));
    assert!(matches!(ik_solve(&robot, &target, &home), Err(Error::Unreachable(_))));
}

#[test]
fn ik_round_trips_random_reachable_poses() {
    let robot = RobotModel::default();
    let home: [f64; ARM_DOF] = robot.home_q[..ARM_DOF].try_into().unwrap();
    let limits = dexprior::scene::joint_limits(&robot);
    let mut rng = substream(47, "ik", 0);
    for trial in 0..100 {
        let mut q = robot.home_q;
        for i in 0..ARM_DOF {
            let (lo, hi) = limits[i];
            let span = hi - lo;
            q[i] = rng.gen_range(lo + 0.05 * span..hi - 0.05 * span);
        }
        let target = robot.fk_unchecked(&q).palm;
        let solved = ik_solve(&robot, &target, &home)
            .unwrap_or_else(|e| panic!("trial {} unsolved: {}", trial, e));
        let mut full = robot.home_q;
        full[..ARM_DOF].copy_from_slice(&solved);
        let palm = robot.fk_unchecked(&full).palm;
        assert!((palm.t - target.t).norm() < 1.0e-3);
        assert!(rotation_distance(palm.rot, target.rot) < 1.0e-2);
        for i in 0..ARM_DOF {
            assert!(solved[i] >= limits[i].0 - 1.0e-12 && solved[i] <= limits[i].1 + 1.0e-12);
        }
    }
}

#[test]
fn nearest_part_labeler_matches_rendered_labels() {
    let robot = RobotModel::default();
    let camera = CameraModel::default_initial();
    let cfg = RenderConfig::default();
    let mut agree = 0usize;
    let mut total = 0usize;
    for seed in 0..4u64 {
        let state = bucket_scene(100 + seed);
        let mut rng = substream(seed, "render", 0);
        let cloud = dexprior::scene::render_scene(&robot, &state, &camera, &cfg, false, true, &mut rng)
            .unwrap();
        let labeler = NearestPartLabeler(&state);
        let preds = labeler.predict(&cloud.points);
        let truth = cloud.labels.unwrap();
        agree += preds.iter().zip(&truth).filter(|(p, t)| p == t).count();
        total += preds.len();
    }
    assert!(agree as f64 / total as f64 > 0.95);
}

#[test]
fn stage_one_selects_a_verified_grasp_on_every_task() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let cfg = RenderConfig::default();
    let ws = Workspace::default();
    let tasks = [TaskKind::Bucket, TaskKind::Laptop, TaskKind::Faucet, TaskKind::Toilet];
    for (ti, task) in tasks.iter().enumerate() {
        let mut ok = 0usize;
        for seed in 0..20u64 {
            let mut rng = substream(1000 + seed, "spawn", ti as u64);
            let state = spawn_scene(&robot, *task, &ws, None, true, &mut rng).unwrap();
            let labeler = NearestPartLabeler(&state);
            let result =
                match run_stage_one(&robot, &state, &labeler, &table, &camera, &cfg, 64, seed) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
            ok += 1;
            assert!(result.chosen.collision_free);
            assert!(!collides(&robot, &result.chosen, &state));
            let mut full = robot.home_q;
            full[..ARM_DOF].copy_from_slice(&result.q_arm);
            let palm = robot.fk_unchecked(&full).palm;
            assert!((palm.t - result.chosen.dexterous.pose.t).norm() < 1.0e-3);
            assert!(rotation_distance(palm.rot, result.chosen.dexterous.pose.rot) < 1.0e-2);
            assert!(result.stats.collision_free <= result.stats.candidates);
            assert!(result.stats.candidates <= result.stats.grasps * WIDTH_PRESETS);

            let again = run_stage_one(&robot, &state, &labeler, &table, &camera, &cfg, 64, seed)
                .unwrap();
            assert_eq!(
                grasp_bits(&again.chosen.source),
                grasp_bits(&result.chosen.source)
            );
            assert_eq!(again.chosen.preset, result.chosen.preset);
            for i in 0..ARM_DOF {
                assert_eq!(again.q_arm[i].to_bits(), result.q_arm[i].to_bits());
            }
        }
        assert!(ok >= 5, "{:?}: only {} of 20 scenes produced a grasp", task, ok);
    }
}

#[test]
fn hand_configs_respect_joint_limits_everywhere() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let limits = dexprior::scene::joint_limits(&robot);
    let mut rng = substream(53, "limits", 0);
    for trial in 0..100 {
        let g = random_grasp(&mut rng);
        let dex = lift_to_dexterous(&g, &table, 1 + trial % WIDTH_PRESETS).unwrap();
        for (k, angle) in dex.hand_config.iter().enumerate() {
            let (lo, hi) = limits[ARM_DOF + k];
            assert!(*angle >= lo - 1.0e-12 && *angle <= hi + 1.0e-12);
        }
    }
}
