//! PPO losses with analytic gradients.

use super::mlp::Activations;
use super::policy::{log_softmax, PolicyNet, ValueNet};
use crate::error::{Error, Result};

/// Clipped surrogate and its gradient with respect to each new log-prob.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    /// Batch mean of `min(ρÂ, clip(ρ)Â)`; to be maximised.
    pub objective: f64,
    pub grad_log_probs: Vec<f64>,
    /// Share of samples whose ratio left `[1-ε, 1+ε]`.
    pub clip_fraction: f64,
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}

fn check_lengths(expected: usize, lens: &[(&str, usize)]) -> Result<()> {
    for (what, len) in lens {
        if *len != expected {
            return Err(Error::Shape(format!("{what} has {len} entries, expected {expected}")));
        }
    }
    Ok(())
}

pub fn clipped_surrogate(
    log_probs_new: &[f64],
    log_probs_old: &[f64],
    advantages: &[f64],
    clip_eps: f64,
) -> Result<Surrogate> {
    let n = log_probs_new.len();
    check_lengths(n, &[("log_probs_old", log_probs_old.len()), ("advantages", advantages.len())])?;
    check_finite("log_probs_new", log_probs_new)?;
    check_finite("log_probs_old", log_probs_old)?;
    check_finite("advantages", advantages)?;
    if n == 0 {
        return Ok(Surrogate {
            objective: 0.0,
            grad_log_probs: Vec::new(),
            clip_fraction: 0.0,
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut objective = 0.0;
    let mut clipped = 0usize;
    let mut grad = Vec::with_capacity(n);
    for ((new, old), adv) in log_probs_new.iter().zip(log_probs_old).zip(advantages) {
        let ratio = (new - old).exp();
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
        if (ratio - 1.0).abs() > clip_eps {
            clipped += 1;
        }
        if unclipped <= bounded {
            objective += unclipped;
            // d(ρÂ)/d log π = ρÂ
            grad.push(unclipped * inv_n);
        } else {
            objective += bounded;
            grad.push(0.0);
        }
    }
    Ok(Surrogate {
        objective: objective * inv_n,
        grad_log_probs: grad,
        clip_fraction: clipped as f64 * inv_n,
    })
}

/// Mean squared error and its gradient with respect to the predictions.
pub fn value_loss(predictions: &[f64], returns: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_lengths(predictions.len(), &[("returns", returns.len())])?;
    if predictions.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let inv_n = 1.0 / predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(returns)
        .map(|(p, r)| {
            let e = p - r;
            loss += e * e;
            2.0 * e * inv_n
        })
        .collect();
    Ok((loss * inv_n, grad))
}

/// Entropy of `softmax(logits)` and its gradient with respect to the logits.
pub fn entropy(logits: &[f64]) -> (f64, Vec<f64>) {
    let logp = log_softmax(logits);
    let h: f64 = -logp
        .iter()
        .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l })
        .sum::<f64>();
    let grad = logp
        .iter()
        .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { -l.exp() * (l + h) })
        .collect();
    (h, grad)
}

/// A minibatch for the policy update.
#[derive(Debug, Clone, Copy)]
pub struct PolicyBatch<'a> {
    pub states: &'a [&'a [f64]],
    pub actions: &'a [usize],
    pub log_probs_old: &'a [f64],
    pub advantages: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyLossReport {
    /// `-(surrogate) - entropy_coef·entropy`; the quantity descended.
    pub loss: f64,
    pub surrogate: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean of `log π_old - log π_new`.
    pub approx_kl: f64,
}

/// Policy loss on a batch, accumulating its parameter gradient into `grads`
/// when given.
pub fn policy_loss(
    net: &PolicyNet,
    batch: PolicyBatch<'_>,
    clip_eps: f64,
    entropy_coef: f64,
    grads: Option<&mut [f64]>,
) -> Result<PolicyLossReport> {
    let n = batch.states.len();
    check_lengths(
        n,
        &[
            ("actions", batch.actions.len()),
            ("log_probs_old", batch.log_probs_old.len()),
            ("advantages", batch.advantages.len()),
        ],
    )?;
    let mut caches = vec![Activations::default(); n];
    let mut log_probs_new = Vec::with_capacity(n);
    let mut all_logp = Vec::with_capacity(n);
    for (i, state) in batch.states.iter().enumerate() {
        net.mlp.forward_cached(state, &mut caches[i])?;
        let logp = log_softmax(caches[i].output());
        let a = batch.actions[i];
        if a >= logp.len() {
            return Err(Error::IndexOutOfRange {
                what: "actions",
                index: a,
                len: logp.len(),
            });
        }
        log_probs_new.push(logp[a]);
        all_logp.push(logp);
    }
    let surrogate = clipped_surrogate(&log_probs_new, batch.log_probs_old, batch.advantages, clip_eps)?;
    let inv_n = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let mut mean_entropy = 0.0;
    let mut entropy_grads = Vec::with_capacity(n);
    for cache in &caches {
        let (h, g) = entropy(cache.output());
        mean_entropy += h * inv_n;
        entropy_grads.push(g);
    }
    let approx_kl = batch
        .log_probs_old
        .iter()
        .zip(&log_probs_new)
        .map(|(o, l)| o - l)
        .sum::<f64>()
        * inv_n;
    let report = PolicyLossReport {
        loss: -surrogate.objective - entropy_coef * mean_entropy,
        surrogate: surrogate.objective,
        entropy: mean_entropy,
        clip_fraction: surrogate.clip_fraction,
        approx_kl,
    };
    if !report.loss.is_finite() {
        return Err(Error::Numeric(format!("policy loss is {}", report.loss)));
    }
    if let Some(grads) = grads {
        let mut grad_logits = Vec::new();
        for i in 0..n {
            let g_lp = surrogate.grad_log_probs[i];
            grad_logits.clear();
            // d log π_a / dz_k = 1[k=a] - π_k
            for (k, (lp, gh)) in all_logp[i].iter().zip(&entropy_grads[i]).enumerate() {
                let onehot = if k == batch.actions[i] { 1.0 } else { 0.0 };
                grad_logits.push(-g_lp * (onehot - lp.exp()) - entropy_coef * inv_n * gh);
            }
            net.mlp.backward(&caches[i], &grad_logits, grads);
        }
    }
    Ok(report)
}

/// Value loss on a batch, accumulating its parameter gradient when given.
pub fn value_objective(
    net: &ValueNet,
    states: &[&[f64]],
    returns: &[f64],
    grads: Option<&mut [f64]>,
) -> Result<f64> {
    check_lengths(states.len(), &[("returns", returns.len())])?;
    let mut caches = vec![Activations::default(); states.len()];
    let mut predictions = Vec::with_capacity(states.len());
    for (state, cache) in states.iter().zip(caches.iter_mut()) {
        predictions.push(net.predict_cached(state, cache)?);
    }
    let (loss, grad_pred) = value_loss(&predictions, returns)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("value loss is {loss}")));
    }
    if let Some(grads) = grads {
        for (cache, g) in caches.iter().zip(&grad_pred) {
            net.mlp.backward(cache, &[*g], grads);
        }
    }
    Ok(loss)
}
