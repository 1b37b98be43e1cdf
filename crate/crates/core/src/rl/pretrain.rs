//! Extractor pretraining: per-point 4-class segmentation with
//! cross-entropy, mirroring the label set the renderer emits
//! (functional part, object body, arm, hand).

use super::net::{FeatureExtractor, PRETRAIN_CLASSES};
use super::nn::{adam_step, init_rng, softmax_ce, AdamState, Mlp};
use crate::geom::Vec3;
use crate::{Error, Result};
use rand::Rng;

/// One labeled cloud for pretraining; classes 0..=3.
#[derive(Debug, Clone)]
pub struct PretrainSample {
    pub cloud: Vec<Vec3>,
    pub labels: Vec<u8>,
}

const PRETRAIN_BATCH: usize = 8;

fn validate(dataset: &[PretrainSample]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::BadDataset("pretraining dataset is empty".into()));
    }
    let mut seen = [false; PRETRAIN_CLASSES];
    for (i, s) in dataset.iter().enumerate() {
        if s.cloud.is_empty() || s.cloud.len() != s.labels.len() {
            return Err(Error::BadDataset(format!(
                "sample {i}: {} points, {} labels",
                s.cloud.len(),
                s.labels.len()
            )));
        }
        for &l in &s.labels {
            if l as usize >= PRETRAIN_CLASSES {
                return Err(Error::BadDataset(format!("sample {i}: label {l} out of range")));
            }
            seen[l as usize] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::BadDataset(format!("class {missing} absent from dataset")));
    }
    Ok(())
}

/// Train the shared encoder plus classification head on per-point labels.
/// The returned extractor keeps its head, which RL simply never calls.
pub fn pretrain_extractor(
    dataset: &[PretrainSample],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<FeatureExtractor> {
    validate(dataset)?;
    let mut rng = init_rng(seed, 0);
    let mut ex = FeatureExtractor::new(&mut rng);
    let mut adam = AdamState::new(ex.n_params());
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        for i in 0..n {
            let j = rng.gen_range(i..n);
            order.swap(i, j);
        }
        for chunk in order.chunks(PRETRAIN_BATCH) {
            let clouds: Vec<&[Vec3]> = chunk.iter().map(|&i| dataset[i].cloud.as_slice()).collect();
            let labels: Vec<u8> =
                chunk.iter().flat_map(|&i| dataset[i].labels.iter().copied()).collect();
            let (logits, enc_cache, head_cache, rows) = ex.forward_pointwise(&clouds);
            let (loss, dlogits) = softmax_ce(&logits, &labels, PRETRAIN_CLASSES);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("pretraining loss {loss}")));
            }
            let mut enc_grads = ex.enc.zero_grads();
            let mut dw = vec![0.0; ex.head.w.len()];
            let mut db = vec![0.0; ex.head.b.len()];
            let dfeats = ex.head.backward(&head_cache, &dlogits, rows, &mut dw, &mut db);
            let _ = ex.enc.backward(&enc_cache, &dfeats, rows, &mut enc_grads);

            let mut flat = ex.flatten();
            let mut flat_grads = Mlp::flatten_grads(&enc_grads);
            flat_grads.extend_from_slice(&dw);
            flat_grads.extend_from_slice(&db);
            adam_step(&mut flat, &flat_grads, &mut adam, lr, 0.9, 0.999, 1.0e-8)?;
            ex.load(&flat);
        }
    }
    Ok(ex)
}

/// Fraction of points whose argmax logit matches the label.
pub fn pointwise_accuracy(ex: &FeatureExtractor, dataset: &[PretrainSample]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for s in dataset {
        let (logits, _, _, rows) = ex.forward_pointwise(&[s.cloud.as_slice()]);
        for r in 0..rows {
            let row = &logits[r * PRETRAIN_CLASSES..(r + 1) * PRETRAIN_CLASSES];
            let mut pred = 0usize;
            for k in 1..PRETRAIN_CLASSES {
                if row[k] > row[pred] {
                    pred = k;
                }
            }
            hit += (pred == s.labels[r] as usize) as usize;
            total += 1;
        }
    }
    hit as f64 / total.max(1) as f64
}
