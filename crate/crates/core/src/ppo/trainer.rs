//! Rollout collection and the clipped-objective update loop.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::buffer::RolloutBuffer;
use super::loss::{policy_loss, value_objective, PolicyBatch};
use super::policy::{ActMode, PolicyNet, ValueNet};
use super::Environment;
use crate::error::{Error, Result};
use crate::seeds::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoHyperparams {
    /// Transitions collected per update.
    pub n_step: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub total_steps: u64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
}

impl Default for PpoHyperparams {
    fn default() -> Self {
        Self {
            n_step: 2048,
            epochs: 10,
            minibatch_size: 64,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            lr_start: 1e-3,
            lr_end: 5.76e-7,
            total_steps: 200_000,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            hidden: vec![64, 64],
        }
    }
}

impl PpoHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("ppo.{field}"), msg));
        if self.n_step == 0 {
            return bad("n_step", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size", "must be at least 1");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps", "must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", "must lie in [0, 1]");
        }
        if !(self.lr_start > 0.0 && self.lr_start.is_finite()) {
            return bad("lr_start", "must be positive");
        }
        if !(self.lr_end >= 0.0 && self.lr_end.is_finite()) {
            return bad("lr_end", "must be non-negative");
        }
        if self.total_steps == 0 {
            return bad("total_steps", "must be at least 1");
        }
        if !(self.value_coef >= 0.0 && self.value_coef.is_finite()) {
            return bad("value_coef", "must be non-negative");
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad("entropy_coef", "must be non-negative");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm", "must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden", "layer widths must be positive");
        }
        Ok(())
    }
}

/// Learning rate after `step` environment steps, decaying linearly from
/// `lr_start` to `lr_end` at `total_steps` and held there afterwards.
pub fn linear_lr(hp: &PpoHyperparams, step: u64) -> f64 {
    if step >= hp.total_steps {
        // The formula can miss the endpoint by an ulp.
        return hp.lr_end;
    }
    hp.lr_start + (hp.lr_end - hp.lr_start) * step as f64 / hp.total_steps as f64
}

/// Statistics of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateMetrics {
    pub update: usize,
    /// Environment steps taken so far.
    pub step: u64,
    /// Mean return of the episodes finished during this rollout; carries the
    /// previous value when none finished.
    pub mean_reward: f64,
    pub episodes: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub lr: f64,
}

pub const METRICS_HEADER: [&str; 10] = [
    "update",
    "step",
    "mean_reward",
    "episodes",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "lr",
];

pub fn write_metrics_csv<W: Write>(metrics: &[UpdateMetrics], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.update.to_string(),
            m.step.to_string(),
            m.mean_reward.to_string(),
            m.episodes.to_string(),
            m.policy_loss.to_string(),
            m.value_loss.to_string(),
            m.entropy.to_string(),
            m.clip_fraction.to_string(),
            m.approx_kl.to_string(),
            m.lr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub metrics: Vec<UpdateMetrics>,
}

/// Optimizer state carried across updates.
struct Learner {
    policy: PolicyNet,
    value: ValueNet,
    policy_adam: Adam,
    value_adam: Adam,
}

#[derive(Debug, Clone, Copy, Default)]
struct LossTotals {
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    clip_fraction: f64,
    approx_kl: f64,
    batches: usize,
}

/// Runs the epochs of minibatch updates on a finished buffer. Returns the
/// mean losses over all minibatches.
pub fn update<R: Rng + ?Sized>(
    policy: &mut PolicyNet,
    value: &mut ValueNet,
    optimizers: (&mut Adam, &mut Adam),
    buffer: &RolloutBuffer,
    hp: &PpoHyperparams,
    lr: f64,
    rng: &mut R,
) -> Result<(f64, f64, f64, f64, f64)> {
    let (policy_adam, value_adam) = optimizers;
    let n = buffer.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut totals = LossTotals::default();
    let mut policy_grads = vec![0.0; policy.mlp.num_params()];
    let mut value_grads = vec![0.0; value.mlp.num_params()];
    let batch_size = hp.minibatch_size.min(n).max(1);
    for _ in 0..hp.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(batch_size) {
            let states: Vec<&[f64]> = chunk.iter().map(|&i| buffer.state(i)).collect();
            let actions: Vec<usize> = chunk.iter().map(|&i| buffer.actions[i]).collect();
            let old: Vec<f64> = chunk.iter().map(|&i| buffer.log_probs[i]).collect();
            let returns: Vec<f64> = chunk.iter().map(|&i| buffer.returns[i]).collect();
            let mut adv: Vec<f64> = chunk.iter().map(|&i| buffer.advantages[i]).collect();
            if hp.normalize_advantages && adv.len() > 1 {
                normalize(&mut adv);
            }

            policy_grads.iter_mut().for_each(|g| *g = 0.0);
            let report = policy_loss(
                policy,
                PolicyBatch {
                    states: &states,
                    actions: &actions,
                    log_probs_old: &old,
                    advantages: &adv,
                },
                hp.clip_eps,
                hp.entropy_coef,
                Some(&mut policy_grads),
            )?;
            clip_grad_norm(&mut policy_grads, hp.max_grad_norm);
            policy_adam.step(policy.mlp.params_mut(), &policy_grads, lr);

            value_grads.iter_mut().for_each(|g| *g = 0.0);
            let vloss = value_objective(value, &states, &returns, Some(&mut value_grads))?;
            value_grads.iter_mut().for_each(|g| *g *= hp.value_coef);
            clip_grad_norm(&mut value_grads, hp.max_grad_norm);
            value_adam.step(value.mlp.params_mut(), &value_grads, lr);

            totals.policy_loss += report.loss;
            totals.value_loss += vloss;
            totals.entropy += report.entropy;
            totals.clip_fraction += report.clip_fraction;
            totals.approx_kl += report.approx_kl;
            totals.batches += 1;
        }
    }
    let k = totals.batches.max(1) as f64;
    let means = (
        totals.policy_loss / k,
        totals.value_loss / k,
        totals.entropy / k,
        totals.clip_fraction / k,
        totals.approx_kl / k,
    );
    if ![means.0, means.1, means.2].iter().all(|v| v.is_finite())
        || policy.mlp.params().iter().chain(value.mlp.params()).any(|p| !p.is_finite())
    {
        return Err(Error::Numeric("non-finite loss or weights after update".into()));
    }
    Ok(means)
}

fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// Trains a policy on environments built by `make_env`. Randomness is drawn
/// from named sub-streams of `seed`: "policy-init", "rollout", "minibatch"
/// and "tasks" (episode seeds passed to `reset`).
pub fn train<E, F>(mut make_env: F, hp: &PpoHyperparams, seed: u64) -> Result<TrainOutcome>
where
    E: Environment,
    F: FnMut() -> Result<E>,
{
    hp.validate()?;
    let mut env = make_env()?;
    let obs_dim = env.observation_dim();
    let actions = env.action_count();
    let mut init_rng = stream(seed, "policy-init");
    let mut rollout_rng = stream(seed, "rollout");
    let mut minibatch_rng = stream(seed, "minibatch");
    let mut task_rng = stream(seed, "tasks");

    let policy = PolicyNet::new(obs_dim, &hp.hidden, actions, &mut init_rng)?;
    let value = ValueNet::new(obs_dim, &hp.hidden, &mut init_rng)?;
    let mut learner = Learner {
        policy_adam: Adam::new(policy.mlp.num_params()),
        value_adam: Adam::new(value.mlp.num_params()),
        policy,
        value,
    };

    let mut state = reset_nonempty(&mut env, &mut task_rng)?;
    let mut buffer = RolloutBuffer::new(obs_dim, hp.n_step);
    let mut metrics = Vec::new();
    let mut episode_return = 0.0;
    let mut mean_reward = f64::NAN;
    let mut step: u64 = 0;

    while step < hp.total_steps {
        buffer.clear();
        let mut finished = Vec::new();
        while !buffer.is_full() {
            let (action, log_prob) = learner.policy.act(&state, ActMode::Sample, &mut rollout_rng)?;
            let v = learner.value.predict(&state)?;
            let t = env.step(action)?;
            episode_return += t.reward;
            buffer.push(&state, action, log_prob, t.reward, v, t.done)?;
            step += 1;
            if t.done {
                finished.push(episode_return);
                episode_return = 0.0;
                state = reset_nonempty(&mut env, &mut task_rng)?;
            } else {
                state = t.state;
            }
        }
        let last_value = learner.value.predict(&state)?;
        let update_index = metrics.len();
        let diagnose = |e: Error| Error::Numeric(format!("update {update_index} at step {step}: {e}"));
        buffer.finish(last_value, hp.gamma, hp.gae_lambda).map_err(diagnose)?;
        let lr = linear_lr(hp, step);
        let (pl, vl, ent, cf, kl) = update(
            &mut learner.policy,
            &mut learner.value,
            (&mut learner.policy_adam, &mut learner.value_adam),
            &buffer,
            hp,
            lr,
            &mut minibatch_rng,
        )
        .map_err(diagnose)?;
        if !finished.is_empty() {
            mean_reward = finished.iter().sum::<f64>() / finished.len() as f64;
        }
        metrics.push(UpdateMetrics {
            update: update_index,
            step,
            mean_reward,
            episodes: finished.len(),
            policy_loss: pl,
            value_loss: vl,
            entropy: ent,
            clip_fraction: cf,
            approx_kl: kl,
            lr,
        });
    }
    Ok(TrainOutcome {
        policy: learner.policy,
        value: learner.value,
        metrics,
    })
}

fn reset_nonempty<E: Environment>(env: &mut E, task_rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let state = env.reset(task_rng.next_u64())?;
    if env.is_done() {
        return Err(Error::Argument("environment produced an episode with no decisions".into()));
    }
    Ok(state)
}
