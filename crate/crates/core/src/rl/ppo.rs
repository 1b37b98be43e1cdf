//! Clipped-surrogate PPO: rollout storage, the loss and its analytic
//! gradients, the epoch/minibatch update loop, and a finite-difference
//! gradient checker over the full network.

use super::net::{NetGrads, NetInput, PolicyValueNet, ACT_DIM, FEAT_DIM, STATE_DIM};
use super::nn::{adam_step, gaussian_entropy, gaussian_log_prob, safe_exp, AdamState};
use crate::error::Error;
use crate::geom::Vec3;
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// PPO hyperparameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub steps_per_env: usize,
    pub n_envs: usize,
    pub normalize_advantages: bool,
    /// Backprop into the point extractor (false keeps it frozen).
    pub finetune_extractor: bool,
}

impl Default for PpoConfig {
    fn default() -> PpoConfig {
        PpoConfig {
            discount: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 256,
            lr: 3.0e-4,
            entropy_coef: 0.0,
            value_coef: 0.5,
            steps_per_env: 512,
            n_envs: 8,
            normalize_advantages: true,
            finetune_extractor: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.discount)
            && (0.0..=1.0).contains(&self.gae_lambda)
            && self.clip > 0.0
            && self.epochs > 0
            && self.minibatch > 0
            && self.lr > 0.0
            && self.value_coef >= 0.0
            && self.entropy_coef >= 0.0
            && self.steps_per_env > 0
            && self.n_envs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("ppo config out of range".into()))
        }
    }

    pub fn batch_len(&self) -> usize {
        self.steps_per_env * self.n_envs
    }
}

/// One rollout batch. Clouds are kept only when the extractor fine-tunes;
/// pooled features are always cached so the frozen path never re-renders.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub clouds: Vec<Vec<Vec3>>,
    pub features: Vec<[f64; FEAT_DIM]>,
    pub states: Vec<[f64; STATE_DIM]>,
    pub actions: Vec<[f64; ACT_DIM]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Normalize advantages to mean 0, std 1 in place.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n < 2 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1.0e-8);
        for a in &mut self.advantages {
            *a = (*a - mean) / std;
        }
    }
}

/// Loss pieces averaged over an update, plus the clip fraction.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Scalar PPO loss over the indexed minibatch, no gradients. Kept textually
/// parallel to [`minibatch_grads`] so finite differences check the same
/// function the update optimizes.
pub fn ppo_loss(net: &PolicyValueNet, buf: &RolloutBuffer, idx: &[usize], cfg: &PpoConfig) -> f64 {
    let (means, values) = forward_minibatch(net, buf, idx, cfg);
    let std = net.std();
    let n = idx.len() as f64;
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    for (row, &i) in idx.iter().enumerate() {
        let mean = &means[row * ACT_DIM..(row + 1) * ACT_DIM];
        let lp = gaussian_log_prob(&buf.actions[i], mean, &std);
        let ratio = safe_exp(lp - buf.log_probs[i]);
        let adv = buf.advantages[i];
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        policy_loss -= surr1.min(surr2);
        let dv = values[row] - buf.returns[i];
        value_loss += dv * dv;
    }
    policy_loss / n + cfg.value_coef * value_loss / n - cfg.entropy_coef * gaussian_entropy(&std)
}

fn forward_minibatch(
    net: &PolicyValueNet,
    buf: &RolloutBuffer,
    idx: &[usize],
    cfg: &PpoConfig,
) -> (Vec<f64>, Vec<f64>) {
    let states: Vec<[f64; STATE_DIM]> = idx.iter().map(|&i| buf.states[i]).collect();
    if cfg.finetune_extractor {
        let clouds: Vec<&[Vec3]> = idx.iter().map(|&i| buf.clouds[i].as_slice()).collect();
        let (m, v, _) = net.forward_batch(&clouds, &states, None);
        (m, v)
    } else {
        let mut feats = Vec::with_capacity(idx.len() * FEAT_DIM);
        for &i in idx {
            feats.extend_from_slice(&buf.features[i]);
        }
        let (m, v, _) = net.forward_batch(&[], &states, Some(&feats));
        (m, v)
    }
}

/// Analytic loss + gradients over the minibatch. Returns per-piece losses,
/// the clip count, and fills `grads`.
pub fn minibatch_grads(
    net: &PolicyValueNet,
    buf: &RolloutBuffer,
    idx: &[usize],
    cfg: &PpoConfig,
    grads: &mut NetGrads,
) -> (PpoStats, f64) {
    let states: Vec<[f64; STATE_DIM]> = idx.iter().map(|&i| buf.states[i]).collect();
    let feats_store;
    let clouds_store;
    let (means, values, cache) = if cfg.finetune_extractor {
        clouds_store = idx.iter().map(|&i| buf.clouds[i].as_slice()).collect::<Vec<_>>();
        net.forward_batch(&clouds_store, &states, None)
    } else {
        let mut feats = Vec::with_capacity(idx.len() * FEAT_DIM);
        for &i in idx {
            feats.extend_from_slice(&buf.features[i]);
        }
        feats_store = feats;
        net.forward_batch(&[], &states, Some(&feats_store))
    };

    let std = net.std();
    let nb = idx.len();
    let n = nb as f64;
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    let mut clipped = 0usize;
    let mut dmeans = vec![0.0; nb * ACT_DIM];
    let mut dvalues = vec![0.0; nb];
    let mut dlog_std = vec![0.0; ACT_DIM];

    for (row, &i) in idx.iter().enumerate() {
        let mean = &means[row * ACT_DIM..(row + 1) * ACT_DIM];
        let action = &buf.actions[i];
        let lp = gaussian_log_prob(action, mean, &std);
        let ratio = safe_exp(lp - buf.log_probs[i]);
        let adv = buf.advantages[i];
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        policy_loss -= surr1.min(surr2);
        if (ratio - 1.0).abs() > cfg.clip {
            clipped += 1;
        }
        // d(loss)/d(logp): the unclipped branch contributes -ratio*adv/n,
        // the clipped branch exactly zero.
        let dlp = if surr1 <= surr2 { -surr1 / n } else { 0.0 };
        for j in 0..ACT_DIM {
            let zs = (action[j] - mean[j]) / std[j];
            dmeans[row * ACT_DIM + j] = dlp * zs / std[j];
            dlog_std[j] += dlp * (zs * zs - 1.0);
        }
        let dv = values[row] - buf.returns[i];
        value_loss += dv * dv;
        dvalues[row] = cfg.value_coef * 2.0 * dv / n;
    }
    // Entropy bonus: dH/dlog_std_j = 1 for every j.
    for g in dlog_std.iter_mut() {
        *g -= cfg.entropy_coef;
    }

    net.backward(&cache, &dmeans, &dvalues, &dlog_std, grads);
    let entropy = gaussian_entropy(&std);
    let stats = PpoStats {
        policy_loss: policy_loss / n,
        value_loss: value_loss / n,
        entropy,
        clip_fraction: clipped as f64 / n,
    };
    let total = stats.policy_loss + cfg.value_coef * stats.value_loss - cfg.entropy_coef * entropy;
    (stats, total)
}

/// Epoch/minibatch PPO update with Adam. Aborts without touching the
/// parameters of the offending step when a non-finite loss appears.
pub fn ppo_update(
    net: &mut PolicyValueNet,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    adam: &mut AdamState,
    rng: &mut ChaCha8Rng,
) -> Result<PpoStats> {
    let n = buf.len();
    if n == 0
        || buf.actions.len() != n
        || buf.log_probs.len() != n
        || buf.advantages.len() != n
        || buf.returns.len() != n
        || (cfg.finetune_extractor && buf.clouds.len() != n)
        || (!cfg.finetune_extractor && buf.features.len() != n)
    {
        return Err(Error::BadBatch("rollout buffer misaligned".into()));
    }
    let n_enc = net.extractor.n_enc_params();
    let mut acc = PpoStats::default();
    let mut pieces = 0usize;

    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        for i in 0..n {
            let j = rng.gen_range(i..n);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.minibatch) {
            let mut grads = net.zero_grads();
            let (stats, total) = minibatch_grads(net, buf, chunk, cfg, &mut grads);
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "minibatch loss {total}: policy {} value {} entropy {}",
                    stats.policy_loss, stats.value_loss, stats.entropy
                )));
            }
            let flat_grads = net.flatten_grads(&grads);
            let mut flat = net.flatten();
            if cfg.finetune_extractor {
                adam_step(&mut flat, &flat_grads, adam, cfg.lr, 0.9, 0.999, 1.0e-8)?;
            } else {
                adam_step(&mut flat[n_enc..], &flat_grads[n_enc..], adam, cfg.lr, 0.9, 0.999, 1.0e-8)?;
            }
            net.load(&flat);
            acc.policy_loss += stats.policy_loss;
            acc.value_loss += stats.value_loss;
            acc.entropy += stats.entropy;
            acc.clip_fraction += stats.clip_fraction;
            pieces += 1;
        }
    }
    let k = pieces.max(1) as f64;
    acc.policy_loss /= k;
    acc.value_loss /= k;
    acc.entropy /= k;
    acc.clip_fraction /= k;
    Ok(acc)
}

/// Adam state sized for the trainable parameter set of `net` under `cfg`.
pub fn adam_for(net: &PolicyValueNet, cfg: &PpoConfig) -> AdamState {
    let n = if cfg.finetune_extractor {
        net.n_params()
    } else {
        net.n_params() - net.extractor.n_enc_params()
    };
    AdamState::new(n)
}

/// Synthetic minibatch for gradient checking: actions drawn from the
/// current policy, mixed-sign advantages, random returns, old log-probs
/// perturbed so ratios spread across the clip boundary.
pub fn synthetic_batch(net: &PolicyValueNet, inputs: &[NetInput], rng: &mut ChaCha8Rng) -> RolloutBuffer {
    let mut buf = RolloutBuffer::default();
    let std = net.std();
    for input in inputs {
        let (mean, _, value) = net.forward(input);
        let (action, lp) = super::nn::sample_action(&mean, &std, rng);
        buf.clouds.push(input.cloud.clone());
        let feat = net.extractor.infer(&input.cloud);
        let mut f = [0.0; FEAT_DIM];
        f.copy_from_slice(&feat);
        buf.features.push(f);
        buf.states.push(input.state);
        let mut a = [0.0; ACT_DIM];
        a.copy_from_slice(&action);
        buf.actions.push(a);
        buf.log_probs.push(lp + rng.gen_range(-0.4..0.4));
        buf.values.push(value);
        buf.rewards.push(rng.gen_range(-1.0..1.0));
        buf.dones.push(false);
        buf.advantages.push(rng.gen_range(-2.0..2.0));
        buf.returns.push(value + rng.gen_range(-1.0..1.0));
    }
    buf
}

/// Max relative error between analytic PPO-loss gradients and central
/// finite differences at `n_probe` parameter coordinates spread over the
/// whole network (extractor included).
pub fn grad_check(
    net: &PolicyValueNet,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    n_probe: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    assert!(eps > 0.0);
    let idx: Vec<usize> = (0..buf.len()).collect();
    let mut grads = net.zero_grads();
    let _ = minibatch_grads(net, buf, &idx, cfg, &mut grads);
    let analytic = net.flatten_grads(&grads);
    let base = net.flatten();
    let n_params = base.len();

    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for _ in 0..n_probe {
        let i = rng.gen_range(0..n_params);
        let mut p = base.clone();
        p[i] = base[i] + eps;
        probe.load(&p);
        let hi = ppo_loss(&probe, buf, &idx, cfg);
        p[i] = base[i] - eps;
        probe.load(&p);
        let lo = ppo_loss(&probe, buf, &idx, cfg);
        let fd = (hi - lo) / (2.0 * eps);
        let scale = analytic[i].abs().max(fd.abs()).max(1.0e-6);
        worst = worst.max((analytic[i] - fd).abs() / scale);
    }
    worst
}
