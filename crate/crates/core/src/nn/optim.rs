//! Adam, gradient clipping, the warmup/plateau/cosine schedule and training configuration.

use serde::{Deserialize, Serialize};

use crate::entropic::RiskAversion;
use crate::error::{input, Result};
use crate::losses::LossKind;

/// Bias-corrected Adam. `β₁ = 0.99` by default, which is unusually high.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub base_lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(num_params: usize, base_lr: f64) -> Self {
        Self { beta1: 0.99, beta2: 0.999, eps: 1e-8, base_lr, m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr_scale: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return input(format!(
                "optimizer holds {} moments, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let lr = self.base_lr * lr_scale;
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Clamps every entry to `±value_clip`, then rescales to norm at most `norm_clip`.
pub fn clip_gradients(grads: &mut [f64], value_clip: f64, norm_clip: f64) {
    for g in grads.iter_mut() {
        *g = g.clamp(-value_clip, value_clip);
    }
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > norm_clip {
        let s = norm_clip / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub total_iters: usize,
    pub warmup_iters: usize,
    pub plateau_iters: usize,
    pub cosine_t_max: usize,
    pub grad_value_clip: f64,
    pub grad_norm_clip: f64,
    pub target_sync_period: usize,
    pub value_lr: f64,
    pub policy_lr: f64,
    pub ra: RiskAversion,
    pub kind: LossKind,
    /// Record the batch loss every this many iterations; 0 disables.
    pub record_every: usize,
    /// Abort on the first non-finite loss instead of recording it.
    pub fail_fast: bool,
}

impl TrainConfig {
    /// Small networks and short runs suitable for a laptop.
    pub fn desk(ra: RiskAversion, kind: LossKind) -> Self {
        Self {
            hidden: vec![32, 32],
            batch_size: 256,
            total_iters: 20_000,
            warmup_iters: 1_000,
            plateau_iters: 9_000,
            cosine_t_max: 10_000,
            grad_value_clip: 1.0,
            grad_norm_clip: 10.0,
            target_sync_period: 100,
            value_lr: 1e-3,
            policy_lr: 1e-3,
            ra,
            kind,
            record_every: 1_000,
            fail_fast: false,
        }
    }

    /// Two hidden layers of 64, batch 1024, `lr = 1e-4`, 100k iterations.
    pub fn full(ra: RiskAversion, kind: LossKind) -> Self {
        Self {
            hidden: vec![64, 64],
            batch_size: 1024,
            total_iters: 100_000,
            warmup_iters: 1_000,
            plateau_iters: 49_000,
            cosine_t_max: 50_000,
            value_lr: 1e-4,
            policy_lr: 1e-4,
            record_every: 1_000,
            ..Self::desk(ra, kind)
        }
    }

    /// Deep-hedging variant of the full profile: 300k iterations.
    pub fn full_hedging(ra: RiskAversion, kind: LossKind) -> Self {
        Self { total_iters: 300_000, plateau_iters: 149_000, cosine_t_max: 150_000, ..Self::full(ra, kind) }
    }

    /// Rescales warmup, plateau and decay to a new run length, keeping their proportions.
    pub fn with_total_iters(mut self, total: usize) -> Self {
        let old = self.total_iters.max(1) as f64;
        let scale = |n: usize| ((n as f64) * total as f64 / old).round() as usize;
        self.warmup_iters = scale(self.warmup_iters).max(1).min(total);
        self.plateau_iters = scale(self.plateau_iters).min(total - self.warmup_iters);
        self.cosine_t_max = (total - self.warmup_iters - self.plateau_iters).max(1);
        self.total_iters = total;
        self
    }

    /// The value net predicts `αV` once `α > 1`, so that its raw output stays
    /// of order one whatever the risk aversion.
    pub fn value_output_scale(&self) -> f64 {
        1.0 / self.ra.alpha().max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_iters == 0 {
            return input("batch size and iteration count must be positive");
        }
        if self.warmup_iters + self.plateau_iters > self.total_iters {
            return input("warmup + plateau exceeds the iteration budget");
        }
        if self.cosine_t_max == 0 || self.target_sync_period == 0 {
            return input("cosine period and target sync period must be positive");
        }
        if !(self.grad_value_clip > 0.0 && self.grad_norm_clip > 0.0) {
            return input("gradient clips must be positive");
        }
        if !(self.value_lr > 0.0 && self.policy_lr > 0.0) {
            return input("learning rates must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return input("hidden layer widths must be positive");
        }
        if self.ra.alpha() < 0.0 {
            return input("learners require a non-negative risk aversion");
        }
        Ok(())
    }
}

/// Learning-rate multiplier: linear ramp 0.01 → 1 over warmup, flat plateau, cosine decay to 0.
pub fn lr_scale(iter: usize, cfg: &TrainConfig) -> f64 {
    if iter < cfg.warmup_iters {
        return 0.01 + 0.99 * iter as f64 / cfg.warmup_iters as f64;
    }
    let decay_start = cfg.warmup_iters + cfg.plateau_iters;
    if iter < decay_start {
        return 1.0;
    }
    let t = (iter - decay_start).min(cfg.cosine_t_max) as f64;
    0.5 * (1.0 + (std::f64::consts::PI * t / cfg.cosine_t_max as f64).cos())
}
