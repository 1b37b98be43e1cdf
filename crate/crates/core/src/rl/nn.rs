//! Dense layers with manual backprop, max-pooling over point sets, Adam,
//! and the diagonal-Gaussian policy head. All matrices are dense row-major
//! f64; batches are rows. Caches carry exactly what the backward pass needs
//! (layer inputs and pre-activations), so forward+backward stays allocation
//! light and bit-reproducible.

use crate::error::Error;
use crate::rng::substream;
use crate::vmath::{fast_exp, fast_tanh, gelu, gelu_prime, matmul_acc, matmul_at_b_acc, matmul_transpose_b};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Activation applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Act {
    Gelu,
    Tanh,
    Identity,
}

/// One dense layer: y = act(x W + b), W stored in-dim x out-dim row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub act: Act,
}

/// Backward-pass state for one layer: the input batch and pre-activations.
#[derive(Debug, Clone)]
pub struct LinearCache {
    input: Vec<f64>,
    preact: Vec<f64>,
}

impl Linear {
    /// Xavier-uniform weights, zero biases.
    pub fn new(in_dim: usize, out_dim: usize, act: Act, rng: &mut ChaCha8Rng) -> Linear {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Linear { w, b: vec![0.0; out_dim], in_dim, out_dim, act }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Forward over an n-row batch; returns activations and the cache.
    pub fn forward(&self, x: &[f64], n: usize) -> (Vec<f64>, LinearCache) {
        assert_eq!(x.len(), n * self.in_dim, "bad input shape");
        let mut z = vec![0.0; n * self.out_dim];
        for row in z.chunks_mut(self.out_dim) {
            row.copy_from_slice(&self.b);
        }
        matmul_acc(x, &self.w, &mut z, n, self.in_dim, self.out_dim);
        let out = match self.act {
            Act::Identity => z.clone(),
            Act::Tanh => z.iter().map(|&v| fast_tanh(v)).collect(),
            Act::Gelu => z.iter().map(|&v| gelu(v)).collect(),
        };
        (out, LinearCache { input: x.to_vec(), preact: z })
    }

    /// Backprop: accumulates dw/db and returns the input gradient.
    pub fn backward(
        &self,
        cache: &LinearCache,
        dout: &[f64],
        n: usize,
        dw: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> {
        assert_eq!(dout.len(), n * self.out_dim, "bad gradient shape");
        let dz: Vec<f64> = match self.act {
            Act::Identity => dout.to_vec(),
            Act::Tanh => cache
                .preact
                .iter()
                .zip(dout)
                .map(|(&z, &g)| {
                    let t = fast_tanh(z);
                    g * (1.0 - t * t)
                })
                .collect(),
            Act::Gelu => cache.preact.iter().zip(dout).map(|(&z, &g)| g * gelu_prime(z)).collect(),
        };
        matmul_at_b_acc(&cache.input, &dz, dw, n, self.in_dim, self.out_dim);
        for row in dz.chunks(self.out_dim) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }
        let mut dx = vec![0.0; n * self.in_dim];
        matmul_transpose_b(&dz, &self.w, &mut dx, n, self.out_dim, self.in_dim);
        dx
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer caches from a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    layers: Vec<LinearCache>,
}

/// Per-layer (weight, bias) gradient accumulators.
pub type MlpGrads = Vec<(Vec<f64>, Vec<f64>)>;

impl Mlp {
    /// Build from (in, out, activation) triples; consecutive dims must chain.
    pub fn new(spec: &[(usize, usize, Act)], rng: &mut ChaCha8Rng) -> Mlp {
        for pair in spec.windows(2) {
            assert_eq!(pair[0].1, pair[1].0, "layer shapes must chain");
        }
        Mlp { layers: spec.iter().map(|&(i, o, a)| Linear::new(i, o, a, rng)).collect() }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Linear::n_params).sum()
    }

    pub fn forward(&self, x: &[f64], n: usize) -> (Vec<f64>, MlpCache) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let (next, cache) = layer.forward(&cur, n);
            caches.push(cache);
            cur = next;
        }
        (cur, MlpCache { layers: caches })
    }

    /// Forward without building caches, for rollouts and evaluation.
    pub fn infer(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let (next, _) = layer.forward(&cur, n);
            cur = next;
        }
        cur
    }

    pub fn zero_grads(&self) -> MlpGrads {
        self.layers.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect()
    }

    /// Backprop through the stack, accumulating into `grads`.
    pub fn backward(&self, cache: &MlpCache, dout: &[f64], n: usize, grads: &mut MlpGrads) -> Vec<f64> {
        let mut cur = dout.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (dw, db) = &mut grads[i];
            cur = layer.backward(&cache.layers[i], &cur, n, dw, db);
        }
        cur
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn load(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count mismatch");
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            let nb = l.b.len();
            l.w.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            l.b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
    }

    pub fn flatten_grads(grads: &MlpGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for (dw, db) in grads {
            out.extend_from_slice(dw);
            out.extend_from_slice(db);
        }
        out
    }
}

/// Mean softmax cross-entropy over rows of class logits. Returns the loss
/// and its logit gradients (already averaged over rows).
pub fn softmax_ce(logits: &[f64], labels: &[u8], classes: usize) -> (f64, Vec<f64>) {
    let rows = labels.len();
    assert_eq!(logits.len(), rows * classes, "bad logit shape");
    assert!(rows > 0);
    let inv = 1.0 / rows as f64;
    let mut dlogits = vec![0.0; logits.len()];
    let mut total = 0.0;
    for r in 0..rows {
        let row = &logits[r * classes..(r + 1) * classes];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for &l in row {
            z += (l - m).exp();
        }
        let y = labels[r] as usize;
        total += (z.ln() + m - row[y]) * inv;
        let drow = &mut dlogits[r * classes..(r + 1) * classes];
        for (k, &l) in row.iter().enumerate() {
            drow[k] = (l - m).exp() / z * inv;
        }
        drow[y] -= inv;
    }
    (total, dlogits)
}

/// Channel-wise max over an n x d feature matrix. Returns the pooled vector
/// and the row index of each channel's maximum (first index on ties, which
/// keeps the backward pass deterministic).
pub fn max_pool(feats: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<usize>) {
    assert_eq!(feats.len(), n * d);
    assert!(n > 0);
    let mut global = feats[..d].to_vec();
    let mut argmax = vec![0usize; d];
    for i in 1..n {
        let row = &feats[i * d..(i + 1) * d];
        for (j, &v) in row.iter().enumerate() {
            if v > global[j] {
                global[j] = v;
                argmax[j] = i;
            }
        }
    }
    (global, argmax)
}

/// Scatter the pooled-feature gradient back to the argmax rows.
pub fn max_pool_backward(argmax: &[usize], dglobal: &[f64], d: usize, dfeats: &mut [f64]) {
    assert_eq!(argmax.len(), d);
    assert_eq!(dglobal.len(), d);
    for j in 0..d {
        dfeats[argmax[j] * d + j] += dglobal[j];
    }
}

/// Adam moment buffers plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> AdamState {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One Adam update with bias correction, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::BadBatch(format!(
            "adam shapes: params {} grads {} state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

const LN_TAU: f64 = 1.837_877_066_409_345_5; // ln(2 pi)

/// Diagonal-Gaussian log density of `action` under N(mean, diag(std^2)).
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    debug_assert_eq!(action.len(), mean.len());
    debug_assert_eq!(action.len(), std.len());
    let mut lp = 0.0;
    for i in 0..action.len() {
        let z = (action[i] - mean[i]) / std[i];
        lp -= 0.5 * z * z + std[i].ln() + 0.5 * LN_TAU;
    }
    lp
}

/// Draw from N(mean, diag(std^2)); returns the sample and its log density.
pub fn sample_action(mean: &[f64], std: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(std)
        .map(|(&m, &s)| {
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        })
        .collect();
    let lp = gaussian_log_prob(&action, mean, std);
    (action, lp)
}

/// Entropy of the diagonal Gaussian: sum_i ln std_i + d/2 ln(2 pi e).
pub fn gaussian_entropy(std: &[f64]) -> f64 {
    let d = std.len() as f64;
    std.iter().map(|s| s.ln()).sum::<f64>() + 0.5 * d * (LN_TAU + 1.0)
}

/// exp clamped for numerical safety in ratio computations.
pub fn safe_exp(x: f64) -> f64 {
    fast_exp(x.clamp(-60.0, 60.0))
}

/// Fresh rng for parameter initialization, one substream per component.
pub fn init_rng(root: u64, index: u64) -> ChaCha8Rng {
    substream(root, "init", index)
}
