//! Independent PPO learners: one actor and one critic per agent, no shared
//! parameters or state between agents.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod dist;
pub mod gae;
pub mod loss;
pub mod nn;
pub mod policy;
pub mod rollout;
pub mod train;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::{ConfigError, TrainConfig};
pub use dist::{DistError, MaskedMultiCategorical};
pub use gae::compute_targets;
pub use loss::{ppo_loss, LossCoefs, Sample};
pub use policy::AgentPolicy;
pub use rollout::{collect, mix_seed, run_episode, EpisodeTrace, RolloutError};
pub use train::{train, AgentMetrics, IterationMetrics, TrainError, TrainSummary, Trainer};

#[cfg(test)]
mod tests;
