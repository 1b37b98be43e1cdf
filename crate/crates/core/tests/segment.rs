//! Oracles and properties for the functional-part segmentation stack.

use dexprior::geom::{vec3, Vec3};
use dexprior::rng::substream;
use dexprior::scene::{PointCloud, TaskKind, LABEL_BODY, LABEL_FUNCTIONAL};
use dexprior::segment::{
    gen_seg_dataset, seg_loss_grads, seg_metrics, segment, segment_with, train_seg,
    OracleLabeler, PointLabeler, SegNet, SegSample, SEG_CLASSES,
};
use rand::Rng;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0e-6)
}

fn random_cloud(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| vec3(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(0.0..0.5)))
        .collect()
}

/// Toy scene: a "handle" ball of functional points floating over a slab of
/// body points, separable by height with a wide margin.
fn toy_sample(rng: &mut rand_chacha::ChaCha8Rng) -> SegSample {
    let mut points = Vec::with_capacity(64);
    let mut labels = Vec::with_capacity(64);
    for _ in 0..32 {
        let dir = vec3(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let dir = dir.normalized().unwrap_or(Vec3::Z);
        let p = vec3(0.0, 0.0, 0.4) + dir * rng.gen_range(0.0..0.08);
        points.push(p);
        labels.push(LABEL_FUNCTIONAL);
    }
    for _ in 0..32 {
        points.push(vec3(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.1)));
        labels.push(LABEL_BODY);
    }
    SegSample {
        cloud: PointCloud { points, labels: Some(labels) },
        task: TaskKind::Bucket,
        scene_seed: 0,
    }
}

struct HeightRule;

impl PointLabeler for HeightRule {
    fn predict(&self, points: &[Vec3]) -> Vec<u8> {
        points.iter().map(|p| if p.z > 0.25 { LABEL_FUNCTIONAL } else { LABEL_BODY }).collect()
    }
}

struct NeverFunctional;

impl PointLabeler for NeverFunctional {
    fn predict(&self, points: &[Vec3]) -> Vec<u8> {
        vec![LABEL_BODY; points.len()]
    }
}

#[test]
fn seg_gradients_match_finite_differences() {
    let mut rng = substream(400, "seg", 0);
    let mut net = SegNet::new(&mut rng);
    let clouds: Vec<Vec<Vec3>> = (0..2).map(|_| random_cloud(12, &mut rng)).collect();
    let labels: Vec<Vec<u8>> = clouds
        .iter()
        .map(|c| c.iter().map(|_| rng.gen_range(0..SEG_CLASSES as u8)).collect())
        .collect();
    let crefs: Vec<&[Vec3]> = clouds.iter().map(|c| c.as_slice()).collect();
    let lrefs: Vec<&[u8]> = labels.iter().map(|l| l.as_slice()).collect();

    let (_, analytic) = seg_loss_grads(&net, &crefs, &lrefs);
    let base = net.flatten();
    let n_params = base.len();
    assert_eq!(analytic.len(), n_params);

    let eps = 1.0e-5;
    let mut worst = 0.0f64;
    for _ in 0..80 {
        let i = rng.gen_range(0..n_params);
        let mut p = base.clone();
        p[i] = base[i] + eps;
        net.load(&p);
        let hi = seg_loss_grads(&net, &crefs, &lrefs).0;
        p[i] = base[i] - eps;
        net.load(&p);
        let lo = seg_loss_grads(&net, &crefs, &lrefs).0;
        worst = worst.max(rel_err(analytic[i], (hi - lo) / (2.0 * eps)));
    }
    assert!(worst < 1.0e-4, "max rel err {worst}");
}

#[test]
fn predictions_permute_with_the_input_points() {
    let mut rng = substream(401, "seg", 1);
    let net = SegNet::new(&mut rng);
    let cloud = random_cloud(64, &mut rng);
    let logits = net.logits(&cloud);

    let mut perm: Vec<usize> = (0..cloud.len()).collect();
    perm.reverse();
    perm.swap(5, 40);
    let shuffled: Vec<Vec3> = perm.iter().map(|&i| cloud[i]).collect();
    let shuffled_logits = net.logits(&shuffled);
    for (row, &src) in perm.iter().enumerate() {
        for k in 0..SEG_CLASSES {
            assert_eq!(
                shuffled_logits[row * SEG_CLASSES + k].to_bits(),
                logits[src * SEG_CLASSES + k].to_bits()
            );
        }
    }
    let labels = net.predict(&cloud);
    let shuffled_labels = net.predict(&shuffled);
    for (row, &src) in perm.iter().enumerate() {
        assert_eq!(shuffled_labels[row], labels[src]);
    }
}

#[test]
fn training_is_deterministic_in_seed() {
    let mut rng = substream(402, "seg", 2);
    let data: Vec<SegSample> = (0..6).map(|_| toy_sample(&mut rng)).collect();
    let (a, curve_a) = train_seg(&data, 2, 1.0e-3, 17).unwrap();
    let (b, curve_b) = train_seg(&data, 2, 1.0e-3, 17).unwrap();
    assert_eq!(curve_a.len(), 2);
    for (x, y) in curve_a.iter().zip(&curve_b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    for (x, y) in a.flatten().iter().zip(&b.flatten()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn training_separates_the_toy_scenes() {
    let mut rng = substream(403, "seg", 3);
    let train: Vec<SegSample> = (0..32).map(|_| toy_sample(&mut rng)).collect();
    let held_out: Vec<SegSample> = (0..8).map(|_| toy_sample(&mut rng)).collect();
    let (net, curve) = train_seg(&train, 40, 2.0e-3, 19).unwrap();
    assert!(curve[0] > *curve.last().unwrap(), "loss did not decrease: {curve:?}");
    let m = seg_metrics(&net, &held_out);
    assert!(m.accuracy >= 0.99, "held-out accuracy {}", m.accuracy);
}

#[test]
fn oracle_labeler_extracts_exactly_the_labeled_subset() {
    let mut rng = substream(404, "seg", 4);
    let sample = toy_sample(&mut rng);
    let labels = sample.cloud.labels.clone().unwrap();
    let labeler = OracleLabeler(labels.clone());
    let got = segment_with(&labeler, &sample.cloud).unwrap();
    let expect: Vec<Vec3> = sample
        .cloud
        .points
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == LABEL_FUNCTIONAL)
        .map(|(p, _)| *p)
        .collect();
    assert_eq!(got.points.len(), expect.len());
    for (a, b) in got.points.iter().zip(&expect) {
        assert_eq!((a.x, a.y, a.z), (b.x, b.y, b.z));
    }
}

#[test]
fn segmentation_is_a_subset_and_idempotent_under_a_fixed_rule() {
    let mut rng = substream(405, "seg", 5);
    let cloud = PointCloud { points: random_cloud(200, &mut rng), labels: None };
    let rule = HeightRule;
    let once = segment_with(&rule, &cloud).unwrap();
    assert!(once.points.len() < cloud.points.len());
    let mut cursor = 0;
    for p in &once.points {
        let found = cloud.points[cursor..]
            .iter()
            .position(|q| (q.x, q.y, q.z) == (p.x, p.y, p.z))
            .expect("output point missing from input");
        cursor += found + 1;
    }
    let twice = segment_with(&rule, &once).unwrap();
    assert_eq!(twice.points.len(), once.points.len());
}

#[test]
fn empty_prediction_reports_no_functional_part() {
    let mut rng = substream(406, "seg", 6);
    let cloud = PointCloud { points: random_cloud(50, &mut rng), labels: None };
    let err = segment_with(&NeverFunctional, &cloud).unwrap_err();
    assert!(matches!(err, dexprior::Error::NoFunctionalPart), "got {err:?}");
}

#[test]
fn trained_net_segment_matches_its_own_predictions() {
    let mut rng = substream(407, "seg", 7);
    let train: Vec<SegSample> = (0..16).map(|_| toy_sample(&mut rng)).collect();
    let (net, _) = train_seg(&train, 10, 2.0e-3, 23).unwrap();
    let sample = toy_sample(&mut rng);
    let preds = net.predict(&sample.cloud.points);
    match segment(&net, &sample.cloud) {
        Ok(sub) => {
            let expect = preds.iter().filter(|&&l| l == LABEL_FUNCTIONAL).count();
            assert_eq!(sub.points.len(), expect);
        }
        Err(dexprior::Error::NoFunctionalPart) => {
            assert!(preds.iter().all(|&l| l != LABEL_FUNCTIONAL));
        }
        Err(e) => panic!("unexpected error {e:?}"),
    }
}

/// Labeler that replays an arbitrary fixed prediction stream.
struct Replay(Vec<u8>, std::cell::Cell<usize>);

impl PointLabeler for Replay {
    fn predict(&self, points: &[Vec3]) -> Vec<u8> {
        let at = self.1.get();
        self.1.set(at + points.len());
        self.0[at..at + points.len()].to_vec()
    }
}

#[test]
fn metrics_are_perfect_for_the_oracle() {
    let mut rng = substream(408, "seg", 8);
    let data: Vec<SegSample> = (0..4).map(|_| toy_sample(&mut rng)).collect();
    let labels: Vec<u8> = data.iter().flat_map(|s| s.cloud.labels.clone().unwrap()).collect();
    let m = seg_metrics(&Replay(labels, std::cell::Cell::new(0)), &data);
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.iou, [1.0, 1.0]);
}

#[test]
fn one_class_predictor_scores_half_on_balanced_data() {
    let mut rng = substream(409, "seg", 9);
    let data: Vec<SegSample> = (0..4).map(|_| toy_sample(&mut rng)).collect();
    let m = seg_metrics(&NeverFunctional, &data);
    assert!((m.accuracy - 0.5).abs() < 1.0e-12);
    assert_eq!(m.iou[LABEL_FUNCTIONAL as usize], 0.0);
    assert!((m.iou[LABEL_BODY as usize] - 0.5).abs() < 1.0e-12);
}

#[test]
fn metrics_match_an_independent_confusion_recount() {
    let mut rng = substream(410, "seg", 10);
    let data: Vec<SegSample> = (0..6).map(|_| toy_sample(&mut rng)).collect();
    let n_points: usize = data.iter().map(|s| s.cloud.points.len()).sum();
    let preds: Vec<u8> = (0..n_points).map(|_| rng.gen_range(0..SEG_CLASSES as u8)).collect();
    let m = seg_metrics(&Replay(preds.clone(), std::cell::Cell::new(0)), &data);

    let mut confusion = [[0usize; SEG_CLASSES]; SEG_CLASSES];
    let mut at = 0;
    for s in &data {
        for &truth in s.cloud.labels.as_ref().unwrap() {
            confusion[truth as usize][preds[at] as usize] += 1;
            at += 1;
        }
    }
    let total: usize = confusion.iter().flatten().sum();
    let hits: usize = (0..SEG_CLASSES).map(|k| confusion[k][k]).sum();
    assert!((m.accuracy - hits as f64 / total as f64).abs() < 1.0e-12);
    for k in 0..SEG_CLASSES {
        let tp = confusion[k][k];
        let fp: usize = (0..SEG_CLASSES).filter(|&r| r != k).map(|r| confusion[r][k]).sum();
        let fn_: usize = (0..SEG_CLASSES).filter(|&c| c != k).map(|c| confusion[k][c]).sum();
        let denom = (tp + fp + fn_) as f64;
        let iou = if denom == 0.0 { 1.0 } else { tp as f64 / denom };
        assert!((m.iou[k] - iou).abs() < 1.0e-12, "class {k}: {} vs {iou}", m.iou[k]);
    }
}

#[test]
fn generator_is_deterministic_and_labels_are_binary() {
    let tasks = [TaskKind::Bucket];
    let a = gen_seg_dataset(&tasks, 4, 77).unwrap();
    let b = gen_seg_dataset(&tasks, 4, 77).unwrap();
    assert_eq!(a.len(), 12); // 3 training variants x 4
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.scene_seed, y.scene_seed);
        assert_eq!(x.cloud.points.len(), y.cloud.points.len());
        for (p, q) in x.cloud.points.iter().zip(&y.cloud.points) {
            assert_eq!((p.x.to_bits(), p.y.to_bits(), p.z.to_bits()), (q.x.to_bits(), q.y.to_bits(), q.z.to_bits()));
        }
        assert_eq!(x.cloud.labels, y.cloud.labels);
    }
}

#[test]
fn generated_samples_are_full_size_with_functional_points() {
    let tasks = [TaskKind::Laptop, TaskKind::Faucet];
    let data = gen_seg_dataset(&tasks, 3, 78).unwrap();
    assert_eq!(data.len(), 18); // 2 tasks x 3 variants x 3
    for s in &data {
        assert_eq!(s.cloud.points.len(), 512);
        let labels = s.cloud.labels.as_ref().unwrap();
        assert_eq!(labels.len(), 512);
        assert!(labels.iter().all(|&l| l == LABEL_FUNCTIONAL || l == LABEL_BODY));
        assert!(labels.iter().any(|&l| l == LABEL_FUNCTIONAL));
    }
}

#[test]
fn generator_varies_articulation_and_placement() {
    let data = gen_seg_dataset(&[TaskKind::Bucket], 6, 79).unwrap();
    let mut centroids: Vec<Vec3> = Vec::new();
    for s in &data {
        let mut c = Vec3::ZERO;
        for p in &s.cloud.points {
            c = c + *p;
        }
        centroids.push(c * (1.0 / s.cloud.points.len() as f64));
    }
    let spread = centroids
        .iter()
        .map(|c| (*c - centroids[0]).norm())
        .fold(0.0f64, f64::max);
    assert!(spread > 0.05, "placements look identical: spread {spread}");
}
