//! Point-feature extractor and the Gaussian policy/value network.
//!
//! The extractor is a shared per-point MLP (3 -> 64 -> 128, GELU) pooled by
//! channel-wise max into one 128-d scene feature; a per-point linear head on
//! the pre-pool features drives 4-class pretraining and is dropped for RL.
//! The policy trunk consumes [feature | proprioception | goal], and separate
//! linear heads emit 22 action means and one value; log-stds are free
//! state-independent parameters.

use super::nn::{max_pool, max_pool_backward, Act, Linear, Mlp, MlpCache, MlpGrads};
use crate::geom::Vec3;
use rand_chacha::ChaCha8Rng;

pub const CLOUD_POINTS: usize = 512;
pub const FEAT_DIM: usize = 128;
pub const PROPRIO_DIM: usize = 35;
pub const GOAL_DIM: usize = 7;
pub const STATE_DIM: usize = PROPRIO_DIM + GOAL_DIM;
pub const TRUNK_IN: usize = FEAT_DIM + STATE_DIM;
pub const ACT_DIM: usize = 22;
pub const PRETRAIN_CLASSES: usize = 4;

const ENC_HIDDEN: usize = 64;
const TRUNK_H1: usize = 256;
const TRUNK_H2: usize = 128;
const LOG_STD_INIT: f64 = -0.5;

/// Shared per-point encoder with max-pool context and a pretraining head.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub enc: Mlp,
    pub head: Linear,
}

/// Forward state for a batch of clouds through the extractor.
pub struct ExtractorCache {
    enc: MlpCache,
    argmax: Vec<Vec<usize>>,
    n_clouds: usize,
    n_points: usize,
}

impl FeatureExtractor {
    pub fn new(rng: &mut ChaCha8Rng) -> FeatureExtractor {
        FeatureExtractor {
            enc: Mlp::new(&[(3, ENC_HIDDEN, Act::Gelu), (ENC_HIDDEN, FEAT_DIM, Act::Gelu)], rng),
            head: Linear::new(FEAT_DIM, PRETRAIN_CLASSES, Act::Identity, rng),
        }
    }

    /// Flatten clouds into one (sum of points) x 3 matrix.
    pub fn pack_clouds(clouds: &[&[Vec3]]) -> Vec<f64> {
        let total: usize = clouds.iter().map(|c| c.len()).sum();
        let mut x = Vec::with_capacity(total * 3);
        for cloud in clouds {
            for p in *cloud {
                x.extend_from_slice(&[p.x, p.y, p.z]);
            }
        }
        x
    }

    /// Pooled features for equally sized clouds, with backward state.
    pub fn forward(&self, clouds: &[&[Vec3]]) -> (Vec<f64>, ExtractorCache) {
        let n_clouds = clouds.len();
        let n_points = clouds[0].len();
        assert!(clouds.iter().all(|c| c.len() == n_points), "ragged cloud batch");
        let x = Self::pack_clouds(clouds);
        let (feats, enc) = self.enc.forward(&x, n_clouds * n_points);
        let mut global = Vec::with_capacity(n_clouds * FEAT_DIM);
        let mut argmax = Vec::with_capacity(n_clouds);
        for c in 0..n_clouds {
            let slab = &feats[c * n_points * FEAT_DIM..(c + 1) * n_points * FEAT_DIM];
            let (g, am) = max_pool(slab, n_points, FEAT_DIM);
            global.extend_from_slice(&g);
            argmax.push(am);
        }
        (global, ExtractorCache { enc, argmax, n_clouds, n_points })
    }

    /// Pooled features without caches, for rollouts and frozen-extractor use.
    pub fn infer(&self, cloud: &[Vec3]) -> Vec<f64> {
        let x = Self::pack_clouds(&[cloud]);
        let feats = self.enc.infer(&x, cloud.len());
        max_pool(&feats, cloud.len(), FEAT_DIM).0
    }

    /// Backprop pooled-feature gradients into encoder weight gradients.
    pub fn backward(&self, cache: &ExtractorCache, dglobal: &[f64], grads: &mut MlpGrads) {
        assert_eq!(dglobal.len(), cache.n_clouds * FEAT_DIM);
        let rows = cache.n_clouds * cache.n_points;
        let mut dfeats = vec![0.0; rows * FEAT_DIM];
        for c in 0..cache.n_clouds {
            let slab = &mut dfeats[c * cache.n_points * FEAT_DIM..(c + 1) * cache.n_points * FEAT_DIM];
            max_pool_backward(&cache.argmax[c], &dglobal[c * FEAT_DIM..(c + 1) * FEAT_DIM], FEAT_DIM, slab);
        }
        let _ = self.enc.backward(&cache.enc, &dfeats, rows, grads);
    }

    /// Per-point class logits for pretraining: rows x 4. Clouds may be
    /// ragged since nothing pools across points here.
    pub fn forward_pointwise(&self, clouds: &[&[Vec3]]) -> (Vec<f64>, MlpCache, super::nn::LinearCache, usize) {
        let rows: usize = clouds.iter().map(|c| c.len()).sum();
        let x = Self::pack_clouds(clouds);
        let (feats, enc) = self.enc.forward(&x, rows);
        let (logits, head) = self.head.forward(&feats, rows);
        (logits, enc, head, rows)
    }

    pub fn n_params(&self) -> usize {
        self.enc.n_params() + self.head.n_params()
    }

    /// Flat parameters: encoder first, then the pretraining head.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.enc.flatten();
        out.extend_from_slice(&self.head.w);
        out.extend_from_slice(&self.head.b);
        out
    }

    pub fn load(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count mismatch");
        let ne = self.enc.n_params();
        self.enc.load(&flat[..ne]);
        let nw = self.head.w.len();
        self.head.w.copy_from_slice(&flat[ne..ne + nw]);
        self.head.b.copy_from_slice(&flat[ne + nw..]);
    }

    /// Encoder-only parameter count (what RL training updates).
    pub fn n_enc_params(&self) -> usize {
        self.enc.n_params()
    }
}

/// Policy + value network over one shared extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    pub extractor: FeatureExtractor,
    pub trunk: Mlp,
    pub policy: Mlp,
    pub value: Mlp,
    pub log_std: Vec<f64>,
}

/// One network input: a fixed-size cloud plus the flat state vector
/// (proprioception then goal).
#[derive(Debug, Clone)]
pub struct NetInput {
    pub cloud: Vec<Vec3>,
    pub state: [f64; STATE_DIM],
}

/// Forward state for a batch, reused by the backward pass.
pub struct NetCache {
    extractor: Option<ExtractorCache>,
    trunk: MlpCache,
    policy: MlpCache,
    value: MlpCache,
    n: usize,
}

/// Gradients for every trainable tensor of [`PolicyValueNet`].
pub struct NetGrads {
    pub enc: MlpGrads,
    pub trunk: MlpGrads,
    pub policy: MlpGrads,
    pub value: MlpGrads,
    pub log_std: Vec<f64>,
}

impl PolicyValueNet {
    pub fn new(rng: &mut ChaCha8Rng) -> PolicyValueNet {
        PolicyValueNet {
            extractor: FeatureExtractor::new(rng),
            trunk: Mlp::new(&[(TRUNK_IN, TRUNK_H1, Act::Tanh), (TRUNK_H1, TRUNK_H2, Act::Tanh)], rng),
            policy: Mlp::new(&[(TRUNK_H2, ACT_DIM, Act::Identity)], rng),
            value: Mlp::new(&[(TRUNK_H2, 1, Act::Identity)], rng),
            log_std: vec![LOG_STD_INIT; ACT_DIM],
        }
    }

    /// Assemble trunk input rows from per-input features and states.
    fn trunk_rows(features: &[f64], states: &[[f64; STATE_DIM]]) -> Vec<f64> {
        let n = states.len();
        assert_eq!(features.len(), n * FEAT_DIM);
        let mut rows = Vec::with_capacity(n * TRUNK_IN);
        for i in 0..n {
            rows.extend_from_slice(&features[i * FEAT_DIM..(i + 1) * FEAT_DIM]);
            rows.extend_from_slice(&states[i]);
        }
        rows
    }

    /// Batched forward with caches. When `precomputed` holds frozen
    /// features the extractor is skipped entirely (and excluded from any
    /// later backward pass).
    pub fn forward_batch(
        &self,
        clouds: &[&[Vec3]],
        states: &[[f64; STATE_DIM]],
        precomputed: Option<&[f64]>,
    ) -> (Vec<f64>, Vec<f64>, NetCache) {
        let n = states.len();
        let (features, ext_cache) = match precomputed {
            Some(f) => {
                assert_eq!(f.len(), n * FEAT_DIM);
                (f.to_vec(), None)
            }
            None => {
                assert_eq!(clouds.len(), n);
                let (f, c) = self.extractor.forward(clouds);
                (f, Some(c))
            }
        };
        let trunk_in = Self::trunk_rows(&features, states);
        let (trunk_out, trunk) = self.trunk.forward(&trunk_in, n);
        let (means, policy) = self.policy.forward(&trunk_out, n);
        let (values, value) = self.value.forward(&trunk_out, n);
        (means, values, NetCache { extractor: ext_cache, trunk, policy, value, n })
    }

    /// Single-input inference: (mean, std, value).
    pub fn forward(&self, input: &NetInput) -> (Vec<f64>, Vec<f64>, f64) {
        let feature = self.extractor.infer(&input.cloud);
        self.forward_from_feature(&feature, &input.state)
    }

    /// Inference from an already-pooled feature (frozen-extractor path).
    pub fn forward_from_feature(&self, feature: &[f64], state: &[f64; STATE_DIM]) -> (Vec<f64>, Vec<f64>, f64) {
        let mut row = Vec::with_capacity(TRUNK_IN);
        row.extend_from_slice(feature);
        row.extend_from_slice(state);
        let trunk_out = self.trunk.infer(&row, 1);
        let mean = self.policy.infer(&trunk_out, 1);
        let value = self.value.infer(&trunk_out, 1)[0];
        let std = self.log_std.iter().map(|&l| super::nn::safe_exp(l)).collect();
        (mean, std, value)
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|&l| super::nn::safe_exp(l)).collect()
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads {
            enc: self.extractor.enc.zero_grads(),
            trunk: self.trunk.zero_grads(),
            policy: self.policy.zero_grads(),
            value: self.value.zero_grads(),
            log_std: vec![0.0; ACT_DIM],
        }
    }

    /// Backprop mean/value gradients through heads, trunk, and (when the
    /// cache carries it) the extractor. `dlog_std` accumulates directly.
    pub fn backward(
        &self,
        cache: &NetCache,
        dmeans: &[f64],
        dvalues: &[f64],
        dlog_std: &[f64],
        grads: &mut NetGrads,
    ) {
        let n = cache.n;
        assert_eq!(dmeans.len(), n * ACT_DIM);
        assert_eq!(dvalues.len(), n);
        let d_trunk_a = self.policy.backward(&cache.policy, dmeans, n, &mut grads.policy);
        let d_trunk_b = self.value.backward(&cache.value, dvalues, n, &mut grads.value);
        let d_trunk_out: Vec<f64> = d_trunk_a.iter().zip(&d_trunk_b).map(|(a, b)| a + b).collect();
        let d_in = self.trunk.backward(&cache.trunk, &d_trunk_out, n, &mut grads.trunk);
        for (acc, &g) in grads.log_std.iter_mut().zip(dlog_std) {
            *acc += g;
        }
        if let Some(ext) = &cache.extractor {
            let mut dglobal = vec![0.0; n * FEAT_DIM];
            for i in 0..n {
                dglobal[i * FEAT_DIM..(i + 1) * FEAT_DIM]
                    .copy_from_slice(&d_in[i * TRUNK_IN..i * TRUNK_IN + FEAT_DIM]);
            }
            self.extractor.backward(ext, &dglobal, &mut grads.enc);
        }
    }

    /// Number of trainable parameters, extractor encoder included.
    pub fn n_params(&self) -> usize {
        self.extractor.enc.n_params()
            + self.trunk.n_params()
            + self.policy.n_params()
            + self.value.n_params()
            + ACT_DIM
    }

    /// Stable flat parameter order: encoder, trunk, policy, value, log-std.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.extractor.enc.flatten();
        out.extend(self.trunk.flatten());
        out.extend(self.policy.flatten());
        out.extend(self.value.flatten());
        out.extend_from_slice(&self.log_std);
        out
    }

    pub fn load(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count mismatch");
        let mut at = 0;
        for part in [&mut self.extractor.enc, &mut self.trunk, &mut self.policy, &mut self.value] {
            let n = part.n_params();
            part.load(&flat[at..at + n]);
            at += n;
        }
        self.log_std.copy_from_slice(&flat[at..]);
    }

    pub fn flatten_grads(&self, grads: &NetGrads) -> Vec<f64> {
        let mut out = Mlp::flatten_grads(&grads.enc);
        out.extend(Mlp::flatten_grads(&grads.trunk));
        out.extend(Mlp::flatten_grads(&grads.policy));
        out.extend(Mlp::flatten_grads(&grads.value));
        out.extend_from_slice(&grads.log_std);
        out
    }
}
