//! Simulator for offloading image-watermarking jobs from one ground user to a
//! ring of LEO satellite edge servers, with a PPO scheduler and baselines.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod economics;
pub mod env;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ppo;
pub mod scenario;
pub mod seeds;
pub mod timeline;
pub mod watermark;

pub use error::{Error, Result};
