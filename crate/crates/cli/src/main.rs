use dexprior::grasp::{
    build_candidates, filter_collisions, ik_solve, sample_two_finger_grasps, select_grasp,
    WidthTable,
};
use dexprior::rng::substream;
use dexprior::scene::{
    render_scene, spawn_scene, CameraModel, RenderConfig, RobotModel, TaskKind, Workspace,
    ARM_DOF,
};
use dexprior::segment::{segment_with, NearestPartLabeler, PointLabeler};

fn main() {
    let robot = RobotModel::default();
    let table = WidthTable::builtin();
    let camera = CameraModel::default_initial();
    let cfg = RenderConfig::default();
    let ws = Workspace::default();
    let tasks = [TaskKind::Bucket, TaskKind::Laptop, TaskKind::Faucet, TaskKind::Toilet];
    for (ti, task) in tasks.iter().enumerate() {
        let mut ok = 0usize;
        let mut stages = std::collections::BTreeMap::<String, usize>::new();
        for seed in 0..20u64 {
            let mut rng = substream(1000 + seed, "spawn", ti as u64);
            let state = spawn_scene(&robot, *task, &ws, None, true, &mut rng).unwrap();
            let labeler = NearestPartLabeler(&state);
            let mut srng = substream(seed, "stage1", 0);
            let cloud = match render_scene(&robot, &state, &camera, &cfg, false, false, &mut srng)
            {
                Ok(c) => c,
                Err(e) => {
                    *stages.entry(format!("render: {e}")).or_default() += 1;
                    continue;
                }
            };
            let pf = match segment_with(&labeler as &dyn PointLabeler, &cloud) {
                Ok(p) => p,
                Err(e) => {
                    *stages.entry(format!("segment: {e}")).or_default() += 1;
                    continue;
                }
            };
            let grasps = match sample_two_finger_grasps(&pf, 64, seed) {
                Ok(g) => g,
                Err(e) => {
                    *stages.entry(format!("sample (pf={}): {e}", pf.points.len())).or_default() +=
                        1;
                    continue;
                }
            };
            let cands = match build_candidates(&grasps, &table, &camera) {
                Ok(c) => c,
                Err(e) => {
                    *stages.entry(format!("build: {e}")).or_default() += 1;
                    continue;
                }
            };
            let n_cands = cands.len();
            let kept = filter_collisions(&robot, cands, &state);
            let chosen = match select_grasp(&kept, &camera) {
                Ok(c) => c,
                Err(e) => {
                    *stages
                        .entry(format!(
                            "select (grasps={} cands={} kept={}): {e}",
                            grasps.len(),
                            n_cands,
                            kept.len()
                        ))
                        .or_default() += 1;
                    continue;
                }
            };
            let home: [f64; ARM_DOF] = robot.home_q[..ARM_DOF].try_into().unwrap();
            match ik_solve(&robot, &chosen.dexterous.pose, &home) {
                Ok(_) => ok += 1,
                Err(e) => {
                    *stages.entry(format!("ik: {e}")).or_default() += 1;
                }
            }
        }
        println!("{task:?}: ok {ok}/20");
        for (stage, n) in stages {
            println!("  {n:2} x {stage}");
        }
    }
}
