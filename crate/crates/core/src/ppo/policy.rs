//! Actor and critic networks and action selection.

use rand::Rng;

use super::mlp::{Activations, Mlp};
use crate::error::{Error, Result};

/// How an action is picked from the policy distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

/// Softmax policy over a discrete action set.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub mlp: Mlp,
}

/// Scalar state-value estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub mlp: Mlp,
}

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        // Mass is split evenly over the infinite logits.
        let count = logits.iter().filter(|&&z| z == f64::INFINITY).count() as f64;
        return logits
            .iter()
            .map(|&z| if z == f64::INFINITY { -count.ln() } else { f64::NEG_INFINITY })
            .collect();
    }
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Draws an action from `probs` by inverse CDF.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the total; take the last action with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], actions: usize, rng: &mut R) -> Result<Self> {
        let dims = layer_dims(obs_dim, hidden, actions);
        Ok(Self {
            mlp: Mlp::new(&dims, 1.0, 0.01, rng)?,
        })
    }

    pub fn action_count(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(state)
    }

    pub fn probabilities(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(state)?))
    }

    /// Picks an action and returns it with its log-probability.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], mode: ActMode, rng: &mut R) -> Result<(usize, f64)> {
        let logp = log_softmax(&self.logits(state)?);
        if logp.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("policy produced NaN log-probabilities".into()));
        }
        let action = match mode {
            ActMode::Greedy => argmax(&logp),
            ActMode::Sample => {
                let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                sample_categorical(&probs, rng)
            }
        };
        Ok((action, logp[action]))
    }
}

impl ValueNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let dims = layer_dims(obs_dim, hidden, 1);
        Ok(Self {
            mlp: Mlp::new(&dims, 1.0, 1.0, rng)?,
        })
    }

    pub fn predict(&self, state: &[f64]) -> Result<f64> {
        Ok(self.mlp.forward(state)?[0])
    }

    pub(crate) fn predict_cached(&self, state: &[f64], cache: &mut Activations) -> Result<f64> {
        self.mlp.forward_cached(state, cache)?;
        Ok(cache.output()[0])
    }
}

fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}
