//! Proximal Policy Optimization with generalized advantage estimation.
//!
//! Rewards are negated per-tick costs, so maximizing return minimizes cost. Rollouts for all
//! trajectories of an iteration are advanced in lockstep so the policy forward pass runs
//! batched; every trajectory owns its own environment and random streams, which keeps batches
//! reproducible for a given seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::env::{Env, EnvConfig};
use crate::mlp::Mlp;
use crate::params::{Airframe, QuadParams, RandomizationMode};
use crate::policy::{gaussian_log_prob, PolicyNet, ValueNet, HALF_LN_2PI, INITIAL_LOG_STD};
use crate::{Error, Result, ACT_DIM, OBS_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Trajectories collected per iteration.
    pub trajectories: usize,
    pub env: EnvConfig,
    pub airframe: Airframe,
    pub randomization: RandomizationMode,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    #[serde(with = "crate::config::switch")]
    pub max_grad_norm: Option<f64>,
    pub entropy_coef: f64,
    /// Stop the epoch loop early once the approximate KL exceeds this value.
    #[serde(with = "crate::config::switch")]
    pub target_kl: Option<f64>,
    pub seed: u64,
    /// Log standard deviation of the exploration noise at initialization.
    pub initial_log_std: f64,
    /// Decay both learning rates linearly to zero over the run.
    pub anneal_lr: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 3000,
            trajectories: 40,
            env: EnvConfig::default(),
            airframe: Airframe::Nominal,
            randomization: RandomizationMode::None,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 10,
            minibatch: 4096,
            policy_lr: 3e-4,
            value_lr: 1e-3,
            max_grad_norm: Some(0.5),
            entropy_coef: 0.0,
            target_kl: None,
            seed: 0,
            initial_log_std: INITIAL_LOG_STD,
            anneal_lr: false,
        }
    }
}

impl TrainConfig {
    /// Randomized scenarios converge more slowly and run twice as many iterations.
    pub fn randomized(randomization: RandomizationMode) -> Self {
        TrainConfig { iterations: 6000, randomization, ..Default::default() }
    }

    /// Laptop-scale profile: 300 iterations of 40 three-second trajectories.
    pub fn desk() -> Self {
        TrainConfig {
            iterations: 300,
            env: EnvConfig { duration: 3.0, ..EnvConfig::default() },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {}", self.gamma));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda {}", self.lambda));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad(format!("clip {}", self.clip));
        }
        if self.trajectories == 0 || self.minibatch == 0 || self.epochs == 0 {
            return bad("trajectories, minibatch and epochs must be positive".into());
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !self.initial_log_std.is_finite() {
            return bad(format!("initial_log_std {}", self.initial_log_std));
        }
        self.env.validate()
    }
}

/// Per-trajectory bookkeeping within a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpan {
    pub start: usize,
    pub len: usize,
    /// Bootstrap value after the last sample.
    pub terminal_value: f64,
    pub aborted: bool,
    /// Σ ‖e_p‖·dt, extrapolated over the remaining ticks when aborted.
    pub position_cost: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub episodes: Vec<EpisodeSpan>,
    pub params: Vec<QuadParams>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn mean_position_cost(&self) -> f64 {
        self.episodes.iter().map(|e| e.position_cost).sum::<f64>() / self.episodes.len().max(1) as f64
    }

    pub fn mean_total_cost(&self) -> f64 {
        self.episodes.iter().map(|e| e.total_cost).sum::<f64>() / self.episodes.len().max(1) as f64
    }

    /// Fills advantages and returns episode by episode.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for ep in &self.episodes {
            let r = &self.rewards[ep.start..ep.start + ep.len];
            let mut v = self.values[ep.start..ep.start + ep.len].to_vec();
            v.push(ep.terminal_value);
            let (adv, ret) = compute_gae(r, &v, gamma, lambda)?;
            self.advantages[ep.start..ep.start + ep.len].copy_from_slice(&adv);
            self.returns[ep.start..ep.start + ep.len].copy_from_slice(&ret);
        }
        Ok(())
    }
}

/// `δₜ = rₜ + γVₜ₊₁ − Vₜ`, `Aₜ = δₜ + γλAₜ₊₁`, returns `A + V`.
///
/// `values` carries one extra trailing entry: the bootstrap value after the last reward.
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::LengthMismatch(format!(
            "{} rewards need {} values, got {}",
            rewards.len(),
            rewards.len() + 1,
            values.len()
        )));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        next = delta + gamma * lambda * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic seed for a (run, iteration, trajectory, stream) tuple.
pub fn derive_seed(seed: u64, iteration: usize, trajectory: usize, stream: u64) -> u64 {
    splitmix(splitmix(splitmix(seed ^ splitmix(stream)) ^ iteration as u64) ^ trajectory as u64)
}

/// Rolls out `cfg.trajectories` episodes with stochastic actions; parameters are drawn
/// fresh per trajectory according to the randomization mode.
pub fn collect_rollouts(
    policy: &PolicyNet,
    value: &ValueNet,
    cfg: &TrainConfig,
    iteration: usize,
) -> Result<RolloutBatch> {
    let base = cfg.airframe.params();
    let n = cfg.trajectories;
    let mut envs = Vec::with_capacity(n);
    let mut action_rngs = Vec::with_capacity(n);
    for k in 0..n {
        let mut env = Env::new(cfg.env.clone(), base.clone(), cfg.randomization, derive_seed(cfg.seed, iteration, k, 0))?;
        env.reset().map_err(|e| Error::Trajectory { index: k, source: Box::new(e) })?;
        envs.push(env);
        action_rngs.push(ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, iteration, k, 1)));
    }
    let params: Vec<QuadParams> = envs.iter().map(|e| e.params().clone()).collect();

    struct Traj {
        obs: Vec<f64>,
        actions: Vec<f64>,
        log_probs: Vec<f64>,
        rewards: Vec<f64>,
        final_obs: [f64; OBS_DIM],
        aborted: bool,
        position_cost: f64,
        total_cost: f64,
        terminal_cost_rate: f64,
        remaining: usize,
    }
    let ticks = cfg.env.max_ticks();
    let mut trajs: Vec<Traj> = (0..n)
        .map(|_| Traj {
            obs: Vec::with_capacity(ticks * OBS_DIM),
            actions: Vec::with_capacity(ticks * ACT_DIM),
            log_probs: Vec::with_capacity(ticks),
            rewards: Vec::with_capacity(ticks),
            final_obs: [0.0; OBS_DIM],
            aborted: false,
            position_cost: 0.0,
            total_cost: 0.0,
            terminal_cost_rate: 0.0,
            remaining: 0,
        })
        .collect();

    let dt = cfg.env.policy_dt();
    let mut active: Vec<usize> = (0..n).collect();
    let mut batch_obs = Vec::with_capacity(n * OBS_DIM);
    while !active.is_empty() {
        batch_obs.clear();
        for &k in &active {
            batch_obs.extend_from_slice(envs[k].observation().as_slice());
        }
        let means = policy.forward_batch(&batch_obs, active.len());
        let mut still = Vec::with_capacity(active.len());
        for (row, &k) in active.iter().enumerate() {
            let mean: [f64; ACT_DIM] = means[row * ACT_DIM..(row + 1) * ACT_DIM].try_into().unwrap();
            let (action, lp) = policy.sample_around(&mean, &mut action_rngs[k]);
            let t = &mut trajs[k];
            t.obs.extend_from_slice(&batch_obs[row * OBS_DIM..(row + 1) * OBS_DIM]);
            t.actions.extend_from_slice(&action);
            t.log_probs.push(lp);
            let out = envs[k]
                .step(&action)
                .map_err(|e| Error::Trajectory { index: k, source: Box::new(e) })?;
            let env = &envs[k];
            let e_p = (env.state().position - env.goal().position).norm();
            t.position_cost += e_p * dt;
            t.total_cost += out.cost;
            t.rewards.push(-out.cost);
            if out.done {
                t.final_obs = out.observation.0;
                t.aborted = out.aborted;
                if out.aborted {
                    // The runaway is charged as if its current cost persisted to the end.
                    t.remaining = out.remaining_ticks;
                    t.terminal_cost_rate = out.cost;
                    t.position_cost += e_p * dt * out.remaining_ticks as f64;
                    t.total_cost += out.cost * out.remaining_ticks as f64;
                }
            } else {
                still.push(k);
            }
        }
        active = still;
    }

    let total: usize = trajs.iter().map(|t| t.rewards.len()).sum();
    let mut batch = RolloutBatch {
        observations: Vec::with_capacity(total * OBS_DIM),
        actions: Vec::with_capacity(total * ACT_DIM),
        log_probs: Vec::with_capacity(total),
        rewards: Vec::with_capacity(total),
        values: Vec::new(),
        episodes: Vec::with_capacity(n),
        params,
        advantages: Vec::new(),
        returns: Vec::new(),
    };
    let mut finals = Vec::with_capacity(n * OBS_DIM);
    for t in &trajs {
        batch.episodes.push(EpisodeSpan {
            start: batch.rewards.len(),
            len: t.rewards.len(),
            terminal_value: 0.0,
            aborted: t.aborted,
            position_cost: t.position_cost,
            total_cost: t.total_cost,
        });
        batch.observations.extend_from_slice(&t.obs);
        batch.actions.extend_from_slice(&t.actions);
        batch.log_probs.extend_from_slice(&t.log_probs);
        batch.rewards.extend_from_slice(&t.rewards);
        finals.extend_from_slice(&t.final_obs);
    }
    batch.values = value.predict_batch(&batch.observations, total);
    let final_values = value.predict_batch(&finals, n);
    for (k, (ep, t)) in batch.episodes.iter_mut().zip(&trajs).enumerate() {
        ep.terminal_value = if t.aborted {
            let g = cfg.gamma;
            let horizon = if g < 1.0 { (1.0 - g.powi(t.remaining as i32)) / (1.0 - g) } else { t.remaining as f64 };
            -t.terminal_cost_rate * horizon
        } else {
            final_values[k]
        };
    }
    Ok(batch)
}

/// Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

fn clip_grad(grad: &mut [f64], max_norm: Option<f64>) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if let Some(max) = max_norm {
        if norm > max {
            let k = max / norm;
            grad.iter_mut().for_each(|g| *g *= k);
        }
    }
    norm
}

/// Clipped-surrogate loss diagnostics for one minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurrogateStats {
    pub loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

/// Loss `−mean(min(ρA, clip(ρ, 1±ε)A)) − c_H·H` and its gradient with respect to the MLP
/// parameters followed by the log-std entries.
#[allow(clippy::too_many_arguments)]
pub fn policy_loss_and_grad(
    mlp: &Mlp,
    log_std: &[f64],
    obs: &[f64],
    actions: &[f64],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> (SurrogateStats, Vec<f64>) {
    let m = old_log_probs.len();
    let ad = mlp.output_size();
    let acts = mlp.forward_cached(obs, m);
    let means = acts.output();
    let inv_std: Vec<f64> = log_std.iter().map(|l| (-l).exp()).collect();
    let mut grad_mean = vec![0.0; m * ad];
    let mut grad_log_std = vec![0.0; ad];
    let mut stats = SurrogateStats::default();
    let scale = 1.0 / m as f64;
    for i in 0..m {
        let mu = &means[i * ad..(i + 1) * ad];
        let a = &actions[i * ad..(i + 1) * ad];
        let lp = gaussian_log_prob(mu, log_std, a);
        let log_ratio = lp - old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = advantages[i];
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        let unclipped_obj = ratio * adv;
        let clipped_obj = clipped * adv;
        stats.loss -= unclipped_obj.min(clipped_obj) * scale;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * scale;
        if (ratio - 1.0).abs() > clip {
            stats.clip_fraction += scale;
        }
        // Gradient flows only through the unclipped branch when it is the minimum.
        if unclipped_obj <= clipped_obj {
            let d_lp = -ratio * adv * scale;
            for j in 0..ad {
                let z = (a[j] - mu[j]) * inv_std[j];
                grad_mean[i * ad + j] += d_lp * z * inv_std[j];
                grad_log_std[j] += d_lp * (z * z - 1.0);
            }
        }
    }
    let entropy: f64 = log_std.iter().map(|l| l + 0.5 + HALF_LN_2PI).sum();
    stats.entropy = entropy;
    stats.loss -= entropy_coef * entropy;
    for g in &mut grad_log_std {
        *g -= entropy_coef;
    }
    let mut grad = vec![0.0; mlp.num_params()];
    mlp.backward(&acts, &grad_mean, &mut grad);
    grad.extend_from_slice(&grad_log_std);
    (stats, grad)
}

/// Mean squared error `mean((V − R)²)` and its gradient.
pub fn value_loss_and_grad(mlp: &Mlp, obs: &[f64], returns: &[f64]) -> (f64, Vec<f64>) {
    let m = returns.len();
    let acts = mlp.forward_cached(obs, m);
    let v = acts.output();
    let mut loss = 0.0;
    let mut grad_out = vec![0.0; m];
    for i in 0..m {
        let d = v[i] - returns[i];
        loss += d * d / m as f64;
        grad_out[i] = 2.0 * d / m as f64;
    }
    let mut grad = vec![0.0; mlp.num_params()];
    mlp.backward(&acts, &grad_out, &mut grad);
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub epochs_run: usize,
}

/// Optimizer state carried across iterations.
#[derive(Debug, Clone)]
pub struct Learner {
    pub policy: PolicyNet,
    pub value: ValueNet,
    policy_opt: Adam,
    value_opt: Adam,
    rng: ChaCha8Rng,
}

impl Learner {
    pub fn new(cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, usize::MAX, 0, 2));
        let mut policy = PolicyNet::init(&mut rng);
        policy.log_std = vec![cfg.initial_log_std; ACT_DIM];
        let value = ValueNet::init(&mut rng);
        Learner::from_nets(policy, value, cfg, rng)
    }

    pub fn from_nets(policy: PolicyNet, value: ValueNet, cfg: &TrainConfig, rng: ChaCha8Rng) -> Self {
        Learner {
            policy_opt: Adam::new(policy.num_params(), cfg.policy_lr),
            value_opt: Adam::new(value.mlp.num_params(), cfg.value_lr),
            policy,
            value,
            rng,
        }
    }

    /// Runs the clipped-surrogate update over shuffled minibatches.
    ///
    /// The batch must already carry advantages; they are normalized here.
    pub fn ppo_update(&mut self, batch: &RolloutBatch, cfg: &TrainConfig) -> Result<UpdateStats> {
        let n = batch.len();
        if batch.advantages.len() != n || batch.returns.len() != n {
            return Err(Error::LengthMismatch("advantages not computed".into()));
        }
        let advantages = normalize(&batch.advantages);
        let mut indices: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut count = 0usize;
        let (mut obs, mut act, mut olp, mut adv, mut ret) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        'epochs: for _ in 0..cfg.epochs {
            indices.shuffle(&mut self.rng);
            let mut epoch_kl = 0.0;
            let mut epoch_batches = 0;
            for chunk in indices.chunks(cfg.minibatch) {
                obs.clear();
                act.clear();
                olp.clear();
                adv.clear();
                ret.clear();
                for &i in chunk {
                    obs.extend_from_slice(&batch.observations[i * OBS_DIM..(i + 1) * OBS_DIM]);
                    act.extend_from_slice(&batch.actions[i * ACT_DIM..(i + 1) * ACT_DIM]);
                    olp.push(batch.log_probs[i]);
                    adv.push(advantages[i]);
                    ret.push(batch.returns[i]);
                }
                let (s, mut g) = policy_loss_and_grad(
                    &self.policy.mlp,
                    &self.policy.log_std,
                    &obs,
                    &act,
                    &olp,
                    &adv,
                    cfg.clip,
                    cfg.entropy_coef,
                );
                let (vl, mut vg) = value_loss_and_grad(&self.value.mlp, &obs, &ret);
                if !s.loss.is_finite() || !vl.is_finite() {
                    return Err(Error::NonFiniteLoss);
                }
                clip_grad(&mut g, cfg.max_grad_norm);
                clip_grad(&mut vg, cfg.max_grad_norm);
                let mut flat: Vec<f64> = self.policy.mlp.params().to_vec();
                flat.extend_from_slice(&self.policy.log_std);
                self.policy_opt.step(&mut flat, &g);
                let k = self.policy.mlp.num_params();
                self.policy.mlp.params_mut().copy_from_slice(&flat[..k]);
                self.policy.log_std.copy_from_slice(&flat[k..]);
                self.value_opt.step(self.value.mlp.params_mut(), &vg);

                stats.policy_loss += s.loss;
                stats.value_loss += vl;
                stats.approx_kl += s.approx_kl;
                stats.clip_fraction += s.clip_fraction;
                stats.entropy += s.entropy;
                count += 1;
                epoch_kl += s.approx_kl;
                epoch_batches += 1;
            }
            stats.epochs_run += 1;
            if let Some(target) = cfg.target_kl {
                if epoch_kl / epoch_batches.max(1) as f64 > target {
                    break 'epochs;
                }
            }
        }
        if count > 0 {
            let c = count as f64;
            stats.policy_loss /= c;
            stats.value_loss /= c;
            stats.approx_kl /= c;
            stats.clip_fraction /= c;
            stats.entropy /= c;
        }
        if !self.policy.is_finite() || self.value.mlp.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        Ok(stats)
    }
}

/// Zero-mean, unit-variance copy.
pub fn normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    x.iter().map(|v| (v - mean) / std).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationStats {
    pub iteration: usize,
    /// Mean over trajectories of Σ ‖e_p‖·dt.
    pub mean_position_cost: f64,
    pub mean_cost: f64,
    pub aborted_fraction: f64,
    pub samples: usize,
    pub update: UpdateStats,
    pub mean_std: f64,
}

pub const CURVE_HEADER: &str =
    "iteration,mean_position_cost,mean_cost,aborted_fraction,samples,policy_loss,value_loss,approx_kl,clip_fraction,entropy,mean_std";

impl IterationStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.mean_position_cost,
            self.mean_cost,
            self.aborted_fraction,
            self.samples,
            self.update.policy_loss,
            self.update.value_loss,
            self.update.approx_kl,
            self.update.clip_fraction,
            self.update.entropy,
            self.mean_std
        )
    }
}

pub fn write_curve<W: Write>(curve: &[IterationStats], mut out: W) -> Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for s in curve {
        writeln!(out, "{}", s.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Policy after the last iteration (parameters rounded to snapshot precision).
    pub policy: PolicyNet,
    pub value: ValueNet,
    /// Lowest-position-cost iteration seen so far and its snapshot.
    pub best_iteration: Option<usize>,
    pub best_snapshot: Vec<u8>,
    pub curve: Vec<IterationStats>,
}

impl TrainOutcome {
    pub fn snapshot(&self) -> Vec<u8> {
        self.policy.to_snapshot()
    }
}

const MAX_NONFINITE_RETRIES: usize = 3;

/// Collect/update loop. `on_iteration` sees every iteration's statistics and the current policy.
pub fn train_with<F>(cfg: &TrainConfig, mut on_iteration: F) -> Result<TrainOutcome>
where
    F: FnMut(&IterationStats, &PolicyNet),
{
    cfg.validate()?;
    let mut learner = Learner::new(cfg);
    learner.policy = learner.policy.quantized();
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(f64, usize, Vec<u8>)> = None;
    let mut failures = 0;
    let mut iteration = 0;
    while iteration < cfg.iterations {
        let mut batch = collect_rollouts(&learner.policy, &learner.value, cfg, iteration)?;
        batch.compute_advantages(cfg.gamma, cfg.lambda)?;
        let position_cost = batch.mean_position_cost();
        // The snapshot that generated this batch is what the statistic describes.
        if best.as_ref().is_none_or(|(c, _, _)| position_cost < *c) {
            best = Some((position_cost, iteration, learner.policy.to_snapshot()));
        }
        if cfg.anneal_lr {
            let frac = 1.0 - iteration as f64 / cfg.iterations as f64;
            learner.policy_opt.lr = cfg.policy_lr * frac;
            learner.value_opt.lr = cfg.value_lr * frac;
        }
        let saved = learner.clone();
        let update = match learner.ppo_update(&batch, cfg) {
            Ok(u) => {
                failures = 0;
                u
            }
            Err(Error::NonFiniteLoss) => {
                failures += 1;
                learner = saved;
                if failures >= MAX_NONFINITE_RETRIES {
                    return Err(Error::NonFiniteLoss);
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        learner.policy = learner.policy.quantized();
        let stats = IterationStats {
            iteration,
            mean_position_cost: position_cost,
            mean_cost: batch.mean_total_cost(),
            aborted_fraction: batch.episodes.iter().filter(|e| e.aborted).count() as f64
                / batch.episodes.len() as f64,
            samples: batch.len(),
            update,
            mean_std: learner.policy.std().iter().sum::<f64>() / ACT_DIM as f64,
        };
        on_iteration(&stats, &learner.policy);
        curve.push(stats);
        iteration += 1;
    }
    let (best_iteration, best_snapshot) = match best {
        Some((_, i, s)) => (Some(i), s),
        None => (None, learner.policy.to_snapshot()),
    };
    Ok(TrainOutcome { policy: learner.policy, value: learner.value, best_iteration, best_snapshot, curve })
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_, _| {})
}

/// Seed-selection statistic: mean position cost over the final tenth of the curve.
pub fn final_position_cost(curve: &[IterationStats]) -> f64 {
    if curve.is_empty() {
        return f64::INFINITY;
    }
    let tail = (curve.len() / 10).max(1);
    curve[curve.len() - tail..].iter().map(|s| s.mean_position_cost).sum::<f64>() / tail as f64
}

/// Seeds ordered by ascending statistic; the first `keep` are returned.
pub fn rank_seeds(runs: &[(u64, Vec<IterationStats>)], keep: usize) -> Vec<(u64, f64)> {
    let mut ranked: Vec<(u64, f64)> = runs.iter().map(|(s, c)| (*s, final_position_cost(c))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked.truncate(keep);
    ranked
}
