//! Time-contiguous rollout storage for one PPO update.

use crate::error::{Error, Result};

use super::gae::gae_advantages;

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    obs_dim: usize,
    capacity: usize,
    states: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize, capacity: usize) -> Self {
        Self {
            obs_dim,
            capacity,
            states: Vec::with_capacity(obs_dim * capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn push(&mut self, state: &[f64], action: usize, log_prob: f64, reward: f64, value: f64, done: bool) -> Result<()> {
        if state.len() != self.obs_dim {
            return Err(Error::Shape(format!(
                "state has {} features, buffer stores {}",
                state.len(),
                self.obs_dim
            )));
        }
        if self.is_full() {
            return Err(Error::Capacity {
                requested: self.len() + 1,
                capacity: self.capacity,
            });
        }
        self.states.extend_from_slice(state);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        Ok(())
    }

    /// Fills advantages and returns; the buffer must be full.
    pub fn finish(&mut self, last_value: f64, gamma: f64, lambda: f64) -> Result<()> {
        if !self.is_full() {
            return Err(Error::Contract(format!(
                "buffer holds {} of {} steps",
                self.len(),
                self.capacity
            )));
        }
        let (adv, ret) = gae_advantages(&self.rewards, &self.values, &self.dones, last_value, gamma, lambda)?;
        if let Some(i) = adv.iter().position(|a| !a.is_finite()) {
            return Err(Error::Numeric(format!("advantage {i} is {}", adv[i])));
        }
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.states.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.advantages.clear();
        self.returns.clear();
    }
}
