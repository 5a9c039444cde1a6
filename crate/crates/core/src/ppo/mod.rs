//! Proximal policy optimization with separate actor and critic networks.

mod adam;
mod buffer;
mod checkpoint;
mod gae;
mod loss;
mod mlp;
mod policy;
mod trainer;

pub use adam::{clip_grad_norm, Adam};
pub use buffer::RolloutBuffer;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gae::gae_advantages;
pub use loss::{
    clipped_surrogate, entropy, policy_loss, value_loss, value_objective, PolicyBatch, PolicyLossReport, Surrogate,
};
pub use mlp::{Activations, Mlp};
pub use policy::{argmax, log_softmax, sample_categorical, softmax, ActMode, PolicyNet, ValueNet};
pub use trainer::{
    linear_lr, train, update, write_metrics_csv, PpoHyperparams, TrainOutcome, UpdateMetrics, METRICS_HEADER,
};

use crate::error::Result;

/// One environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a discrete action set.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Starts a new episode; equal seeds give equal episodes.
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: usize) -> Result<Transition>;
    fn is_done(&self) -> bool;
}
