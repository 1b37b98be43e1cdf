//! Functional-part segmentation: dataset generation, a per-point network
//! with pooled scene context, training, and inference.

use crate::geom::Vec3;
use crate::rl::{
    adam_step, max_pool, max_pool_backward, softmax_ce, Act, AdamState, Mlp, MlpCache, MlpGrads,
};
use crate::rng::substream;
use crate::scene::{
    render_scene, spawn_scene, train_variants, CameraModel, PointCloud, RenderConfig, RobotModel,
    SceneState, TaskKind, Workspace, LABEL_BODY, LABEL_FUNCTIONAL,
};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SEG_CLASSES: usize = 2;
/// Default clouds generated per object variant.
pub const SEG_PER_OBJECT: usize = 3000;
pub const SEG_EPOCHS: usize = 30;
pub const SEG_LR: f64 = 1.0e-3;

const SEG_BATCH: usize = 8;
const FEAT: usize = 128;
const ENC_HIDDEN: usize = 64;
const DEC_HIDDEN: usize = 128;

/// One labeled training cloud plus its provenance.
#[derive(Debug, Clone)]
pub struct SegSample {
    pub cloud: PointCloud,
    pub task: TaskKind,
    /// Substream index that regenerates this sample.
    pub scene_seed: u64,
}

/// Per-point classifier: a shared encoder whose pooled feature is
/// concatenated back onto every point feature before decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct SegNet {
    pub enc: Mlp,
    pub dec: Mlp,
}

struct SegCache {
    enc: MlpCache,
    dec: MlpCache,
    argmax: Vec<usize>,
    n: usize,
}

impl SegNet {
    pub fn new(rng: &mut ChaCha8Rng) -> SegNet {
        SegNet {
            enc: Mlp::new(&[(3, ENC_HIDDEN, Act::Gelu), (ENC_HIDDEN, FEAT, Act::Gelu)], rng),
            dec: Mlp::new(
                &[(2 * FEAT, DEC_HIDDEN, Act::Gelu), (DEC_HIDDEN, SEG_CLASSES, Act::Identity)],
                rng,
            ),
        }
    }

    fn pack(points: &[Vec3]) -> Vec<f64> {
        let mut x = Vec::with_capacity(points.len() * 3);
        for p in points {
            x.extend_from_slice(&[p.x, p.y, p.z]);
        }
        x
    }

    fn decoder_rows(feats: &[f64], global: &[f64], n: usize) -> Vec<f64> {
        let mut rows = Vec::with_capacity(n * 2 * FEAT);
        for i in 0..n {
            rows.extend_from_slice(&feats[i * FEAT..(i + 1) * FEAT]);
            rows.extend_from_slice(global);
        }
        rows
    }

    fn forward(&self, points: &[Vec3]) -> (Vec<f64>, SegCache) {
        let n = points.len();
        let (feats, enc) = self.enc.forward(&Self::pack(points), n);
        let (global, argmax) = max_pool(&feats, n, FEAT);
        let (logits, dec) = self.dec.forward(&Self::decoder_rows(&feats, &global, n), n);
        (logits, SegCache { enc, dec, argmax, n })
    }

    /// Per-point class logits, n x 2, without backward state.
    pub fn logits(&self, points: &[Vec3]) -> Vec<f64> {
        let n = points.len();
        let feats = self.enc.infer(&Self::pack(points), n);
        let (global, _) = max_pool(&feats, n, FEAT);
        self.dec.infer(&Self::decoder_rows(&feats, &global, n), n)
    }

    fn backward(
        &self,
        cache: &SegCache,
        dlogits: &[f64],
        enc_grads: &mut MlpGrads,
        dec_grads: &mut MlpGrads,
    ) {
        let n = cache.n;
        let ddec_in = self.dec.backward(&cache.dec, dlogits, n, dec_grads);
        let mut dfeats = vec![0.0; n * FEAT];
        let mut dglobal = vec![0.0; FEAT];
        for i in 0..n {
            let row = &ddec_in[i * 2 * FEAT..(i + 1) * 2 * FEAT];
            dfeats[i * FEAT..(i + 1) * FEAT].copy_from_slice(&row[..FEAT]);
            for (g, &v) in dglobal.iter_mut().zip(&row[FEAT..]) {
                *g += v;
            }
        }
        max_pool_backward(&cache.argmax, &dglobal, FEAT, &mut dfeats);
        let _ = self.enc.backward(&cache.enc, &dfeats, n, enc_grads);
    }

    pub fn n_params(&self) -> usize {
        self.enc.n_params() + self.dec.n_params()
    }

    /// Flat parameters: encoder, then decoder.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.enc.flatten();
        out.extend(self.dec.flatten());
        out
    }

    pub fn load(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count mismatch");
        let ne = self.enc.n_params();
        self.enc.load(&flat[..ne]);
        self.dec.load(&flat[ne..]);
    }
}

/// Anything that assigns a class to every point of a cloud.
pub trait PointLabeler {
    /// Per-point classes, 0 = functional.
    fn predict(&self, points: &[Vec3]) -> Vec<u8>;
}

impl PointLabeler for SegNet {
    fn predict(&self, points: &[Vec3]) -> Vec<u8> {
        let logits = self.logits(points);
        logits
            .chunks(SEG_CLASSES)
            .map(|row| {
                let mut best = 0usize;
                for k in 1..SEG_CLASSES {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best as u8
            })
            .collect()
    }
}

/// Replays ground-truth labels; a diagnostics double for the net.
pub struct OracleLabeler(pub Vec<u8>);

impl PointLabeler for OracleLabeler {
    fn predict(&self, points: &[Vec3]) -> Vec<u8> {
        assert_eq!(self.0.len(), points.len(), "oracle label count");
        self.0.clone()
    }
}

/// Labels each point by its nearest object part; geometric ground truth
/// that needs no trained weights.
pub struct NearestPartLabeler<'a>(pub &'a SceneState);

impl PointLabeler for NearestPartLabeler<'_> {
    fn predict(&self, points: &[Vec3]) -> Vec<u8> {
        let functional = self.0.object.functional_shapes();
        let body = self.0.object.body_shapes();
        let min_dist = |shapes: &[crate::geom::Shape], p: Vec3| {
            shapes
                .iter()
                .map(|s| s.signed_distance(p))
                .fold(f64::INFINITY, f64::min)
        };
        points
            .iter()
            .map(|&p| {
                if min_dist(&functional, p) <= min_dist(&body, p) {
                    LABEL_FUNCTIONAL
                } else {
                    LABEL_BODY
                }
            })
            .collect()
    }
}

/// Mean per-point cross-entropy over a cloud batch, with flat parameter
/// gradients aligned to [`SegNet::flatten`].
pub fn seg_loss_grads(net: &SegNet, clouds: &[&[Vec3]], labels: &[&[u8]]) -> (f64, Vec<f64>) {
    assert_eq!(clouds.len(), labels.len());
    let total: usize = clouds.iter().map(|c| c.len()).sum();
    let mut enc_grads = net.enc.zero_grads();
    let mut dec_grads = net.dec.zero_grads();
    let mut loss = 0.0;
    for (cloud, lab) in clouds.iter().zip(labels) {
        assert_eq!(cloud.len(), lab.len());
        let weight = cloud.len() as f64 / total as f64;
        let (logits, cache) = net.forward(cloud);
        let (l, mut dlogits) = softmax_ce(&logits, lab, SEG_CLASSES);
        loss += l * weight;
        for d in dlogits.iter_mut() {
            *d *= weight;
        }
        net.backward(&cache, &dlogits, &mut enc_grads, &mut dec_grads);
    }
    let mut flat = Mlp::flatten_grads(&enc_grads);
    flat.extend(Mlp::flatten_grads(&dec_grads));
    (loss, flat)
}

fn validate_dataset(dataset: &[SegSample]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::BadDataset("segmentation dataset is empty".into()));
    }
    for (i, s) in dataset.iter().enumerate() {
        let labels = s
            .cloud
            .labels
            .as_ref()
            .ok_or_else(|| Error::BadDataset(format!("sample {i} is unlabeled")))?;
        if s.cloud.points.is_empty() || labels.len() != s.cloud.points.len() {
            return Err(Error::BadDataset(format!(
                "sample {i}: {} points, {} labels",
                s.cloud.points.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l as usize >= SEG_CLASSES) {
            return Err(Error::BadDataset(format!("sample {i}: label out of range")));
        }
    }
    Ok(())
}

/// Train a fresh net with Adam on mini-batches of clouds. Returns the net
/// and the per-epoch mean batch loss.
pub fn train_seg(
    dataset: &[SegSample],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<(SegNet, Vec<f64>)> {
    validate_dataset(dataset)?;
    let mut rng = substream(seed, "seg-train", 0);
    let mut net = SegNet::new(&mut rng);
    let mut adam = AdamState::new(net.n_params());
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        for i in 0..n {
            let j = rng.gen_range(i..n);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(SEG_BATCH) {
            let clouds: Vec<&[Vec3]> =
                chunk.iter().map(|&i| dataset[i].cloud.points.as_slice()).collect();
            let labels: Vec<&[u8]> =
                chunk.iter().map(|&i| dataset[i].cloud.labels.as_deref().unwrap()).collect();
            let (loss, grads) = seg_loss_grads(&net, &clouds, &labels);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("segmentation loss {loss}")));
            }
            let mut flat = net.flatten();
            adam_step(&mut flat, &grads, &mut adam, lr, 0.9, 0.999, 1.0e-8)?;
            net.load(&flat);
            epoch_loss += loss;
            batches += 1;
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok((net, curve))
}

/// The predicted-functional subset of `cloud`, order preserved.
pub fn segment_with<L: PointLabeler + ?Sized>(labeler: &L, cloud: &PointCloud) -> Result<PointCloud> {
    let preds = labeler.predict(&cloud.points);
    let points: Vec<Vec3> = cloud
        .points
        .iter()
        .zip(&preds)
        .filter(|(_, &l)| l == LABEL_FUNCTIONAL)
        .map(|(p, _)| *p)
        .collect();
    if points.is_empty() {
        return Err(Error::NoFunctionalPart);
    }
    Ok(PointCloud { points, labels: None })
}

/// [`segment_with`] for the trained net.
pub fn segment(net: &SegNet, cloud: &PointCloud) -> Result<PointCloud> {
    segment_with(net, cloud)
}

/// Confusion-matrix metrics over a labeled dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegMetrics {
    pub accuracy: f64,
    /// Per-class intersection over union; 1.0 for classes absent from both
    /// truth and prediction.
    pub iou: [f64; SEG_CLASSES],
}

pub fn seg_metrics<L: PointLabeler + ?Sized>(labeler: &L, dataset: &[SegSample]) -> SegMetrics {
    let mut confusion = [[0usize; SEG_CLASSES]; SEG_CLASSES];
    for s in dataset {
        let truth = s.cloud.labels.as_ref().expect("labeled dataset");
        let preds = labeler.predict(&s.cloud.points);
        for (&t, &p) in truth.iter().zip(&preds) {
            confusion[t as usize][p as usize] += 1;
        }
    }
    let total: usize = confusion.iter().flatten().sum();
    let hits: usize = (0..SEG_CLASSES).map(|k| confusion[k][k]).sum();
    let mut iou = [0.0; SEG_CLASSES];
    for (k, slot) in iou.iter_mut().enumerate() {
        let tp = confusion[k][k];
        let fp: usize = (0..SEG_CLASSES).filter(|&r| r != k).map(|r| confusion[r][k]).sum();
        let missed: usize = (0..SEG_CLASSES).filter(|&c| c != k).map(|c| confusion[k][c]).sum();
        let denom = tp + fp + missed;
        *slot = if denom == 0 { 1.0 } else { tp as f64 / denom as f64 };
    }
    SegMetrics { accuracy: hits as f64 / total.max(1) as f64, iou }
}

/// Labeled clouds from the stage-one camera: for every training variant of
/// every task, `n_per_object` views with random placement and articulation.
/// Views without a visible functional point are rejected and redrawn.
pub fn gen_seg_dataset(
    tasks: &[TaskKind],
    n_per_object: usize,
    seed: u64,
) -> Result<Vec<SegSample>> {
    let robot = RobotModel::default();
    let workspace = Workspace::default();
    let camera = CameraModel::default_initial();
    let cfg = RenderConfig::default();
    let mut out = Vec::with_capacity(tasks.len() * 3 * n_per_object);
    let mut idx = 0u64;
    for &task in tasks {
        for (_, scale) in train_variants(task) {
            for _ in 0..n_per_object {
                let mut rng = substream(seed, "seg-data", idx);
                let mut found = None;
                for _ in 0..512 {
                    let state = spawn_scene(&robot, task, &workspace, Some(scale), true, &mut rng)?;
                    match render_scene(&robot, &state, &camera, &cfg, false, true, &mut rng) {
                        Ok(cloud) => {
                            let has_functional = cloud
                                .labels
                                .as_ref()
                                .is_some_and(|l| l.iter().any(|&x| x == LABEL_FUNCTIONAL));
                            if has_functional {
                                found = Some(cloud);
                                break;
                            }
                        }
                        Err(Error::EmptyView) => {}
                        Err(e) => return Err(e),
                    }
                }
                let cloud = found.ok_or(Error::NoFunctionalPart)?;
                out.push(SegSample { cloud, task, scene_seed: idx });
                idx += 1;
            }
        }
    }
    Ok(out)
}
