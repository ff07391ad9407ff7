//! Hand-rolled policy/value network with manual backprop and Adam.
//!
//! Two tanh hidden layers shared by a Gaussian action head (state-
//! independent log-std) and a value head. Parameters live in one flat
//! `Vec<f64>` so checkpoints and the optimizer stay trivial.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: (usize, usize),
}

impl NetShape {
    pub fn n_params(&self) -> usize {
        let (h1, h2) = self.hidden;
        h1 * self.obs_dim + h1          // layer 1
            + h2 * h1 + h2              // layer 2
            + self.act_dim * h2 + self.act_dim // mean head
            + h2 + 1                    // value head
            + self.act_dim              // log-std
    }
}

/// Offsets of each block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wmu: usize,
    bmu: usize,
    wv: usize,
    bv: usize,
    log_std: usize,
}

fn layout(shape: &NetShape) -> Layout {
    let (h1, h2) = shape.hidden;
    let w1 = 0;
    let b1 = w1 + h1 * shape.obs_dim;
    let w2 = b1 + h1;
    let b2 = w2 + h2 * h1;
    let wmu = b2 + h2;
    let bmu = wmu + shape.act_dim * h2;
    let wv = bmu + shape.act_dim;
    let bv = wv + h2;
    let log_std = bv + 1;
    Layout {
        w1,
        b1,
        w2,
        b2,
        wmu,
        bmu,
        wv,
        bv,
        log_std,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub shape: NetShape,
    pub params: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct Forward {
    pub obs: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub mean: Vec<f64>,
    pub value: f64,
    pub log_std: Vec<f64>,
}

impl PolicyNet {
    pub fn new(shape: NetShape, rng: &mut impl Rng) -> PolicyNet {
        let l = layout(&shape);
        let mut params = vec![0.0; shape.n_params()];
        let (h1, h2) = shape.hidden;
        // Xavier-style init on the weight blocks; biases zero.
        let mut init = |from: usize, to: usize, fan_in: usize, rng: &mut dyn rand::RngCore| {
            let scale = (1.0 / fan_in as f64).sqrt();
            for p in &mut params[from..to] {
                let mut r = || {
                    let mut b = [0u8; 8];
                    rng.fill_bytes(&mut b);
                    u64::from_le_bytes(b) as f64 / u64::MAX as f64
                };
                *p = (r() * 2.0 - 1.0) * scale;
            }
        };
        init(l.w1, l.b1, shape.obs_dim, rng);
        init(l.w2, l.b2, h1, rng);
        init(l.wmu, l.bmu, h2, rng);
        init(l.wv, l.bv, h2, rng);
        for p in &mut params[l.log_std..l.log_std + shape.act_dim] {
            *p = -0.5;
        }
        PolicyNet { shape, params }
    }

    pub fn forward(&self, obs: &[f64]) -> Forward {
        let l = layout(&self.shape);
        let (h1, h2) = self.shape.hidden;
        let p = &self.params;
        let mut a1 = vec![0.0; h1];
        for i in 0..h1 {
            let mut z = p[l.b1 + i];
            let row = l.w1 + i * self.shape.obs_dim;
            for (j, &x) in obs.iter().enumerate() {
                z += p[row + j] * x;
            }
            a1[i] = z.tanh();
        }
        let mut a2 = vec![0.0; h2];
        for i in 0..h2 {
            let mut z = p[l.b2 + i];
            let row = l.w2 + i * h1;
            for (j, &x) in a1.iter().enumerate() {
                z += p[row + j] * x;
            }
            a2[i] = z.tanh();
        }
        let mut mean = vec![0.0; self.shape.act_dim];
        for k in 0..self.shape.act_dim {
            let mut z = p[l.bmu + k];
            let row = l.wmu + k * h2;
            for (j, &x) in a2.iter().enumerate() {
                z += p[row + j] * x;
            }
            mean[k] = z;
        }
        let mut value = p[l.bv];
        for (j, &x) in a2.iter().enumerate() {
            value += p[l.wv + j] * x;
        }
        let log_std = p[l.log_std..l.log_std + self.shape.act_dim].to_vec();
        Forward {
            obs: obs.to_vec(),
            a1,
            a2,
            mean,
            value,
            log_std,
        }
    }

    /// Accumulate gradients for one sample given upstream derivatives
    /// d(loss)/d(mean_k), d(loss)/d(value) and d(loss)/d(log_std_k).
    pub fn backward(
        &self,
        fwd: &Forward,
        d_mean: &[f64],
        d_value: f64,
        d_log_std: &[f64],
        grad: &mut [f64],
    ) {
        let l = layout(&self.shape);
        let (h1, h2) = self.shape.hidden;
        let p = &self.params;

        for (k, &g) in d_log_std.iter().enumerate() {
            grad[l.log_std + k] += g;
        }

        // Heads into a2.
        let mut d_a2 = vec![0.0; h2];
        for (k, &g) in d_mean.iter().enumerate() {
            let row = l.wmu + k * h2;
            grad[l.bmu + k] += g;
            for j in 0..h2 {
                grad[row + j] += g * fwd.a2[j];
                d_a2[j] += g * p[row + j];
            }
        }
        grad[l.bv] += d_value;
        for j in 0..h2 {
            grad[l.wv + j] += d_value * fwd.a2[j];
            d_a2[j] += d_value * p[l.wv + j];
        }

        // Through tanh of layer 2.
        let mut d_a1 = vec![0.0; h1];
        for i in 0..h2 {
            let dz = d_a2[i] * (1.0 - fwd.a2[i] * fwd.a2[i]);
            let row = l.w2 + i * h1;
            grad[l.b2 + i] += dz;
            for j in 0..h1 {
                grad[row + j] += dz * fwd.a1[j];
                d_a1[j] += dz * p[row + j];
            }
        }

        // Through tanh of layer 1.
        for i in 0..h1 {
            let dz = d_a1[i] * (1.0 - fwd.a1[i] * fwd.a1[i]);
            let row = l.w1 + i * self.shape.obs_dim;
            grad[l.b1 + i] += dz;
            for j in 0..self.shape.obs_dim {
                grad[row + j] += dz * fwd.obs[j];
            }
        }
    }

    pub fn log_std(&self) -> &[f64] {
        let l = layout(&self.shape);
        &self.params[l.log_std..l.log_std + self.shape.act_dim]
    }
}

/// Gaussian log-density of `action` under N(mean, exp(log_std)^2).
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    const HALF_LN_2PI: f64 = 0.918938533204672742; // ln(2*pi)/2
    mean.iter()
        .zip(log_std.iter())
        .zip(action.iter())
        .map(|((&m, &ls), &a)| {
            let inv_std = (-ls).exp();
            let z = (a - m) * inv_std;
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
