//! Learning stack: dense layers with manual backprop, the point-feature
//! extractor, the Gaussian policy/value network, GAE, PPO updates, rollout
//! collection, and extractor pretraining.

mod net;
mod nn;
mod ppo;
mod pretrain;

pub use net::{
    FeatureExtractor, NetCache, NetGrads, NetInput, PolicyValueNet, ACT_DIM, CLOUD_POINTS,
    FEAT_DIM, GOAL_DIM, PRETRAIN_CLASSES, PROPRIO_DIM, STATE_DIM, TRUNK_IN,
};
pub use nn::{
    adam_step, gaussian_entropy, gaussian_log_prob, init_rng, max_pool, max_pool_backward,
    safe_exp, sample_action, softmax_ce, Act, AdamState, Linear, LinearCache, Mlp, MlpCache,
    MlpGrads,
};
pub use pretrain::{pointwise_accuracy, pretrain_extractor, PretrainSample};
pub use ppo::{
    adam_for, grad_check, minibatch_grads, ppo_loss, ppo_update, synthetic_batch, PpoConfig,
    PpoStats, RolloutBuffer,
};

use crate::error::Error;
use crate::Result;

/// Generalized advantage estimation by backward recursion.
///
/// `values` carries one bootstrap entry beyond the last reward; `dones[t]`
/// marks a terminal transition, cutting both the bootstrap and the decay.
/// Returns (advantages, returns) with returns = advantages + values.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lam: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_max = rewards.len();
    if values.len() != t_max + 1 || dones.len() != t_max {
        return Err(Error::BadBatch(format!(
            "gae lengths: rewards {} values {} dones {}",
            t_max,
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; t_max];
    let mut carry = 0.0;
    for t in (0..t_max).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * cont - values[t];
        carry = delta + gamma * lam * cont * carry;
        adv[t] = carry;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}
