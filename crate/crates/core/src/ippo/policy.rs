//! Per-agent actor and critic; the two networks share no layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::dist::{DistError, MaskedMultiCategorical};
use super::nn::Mlp;
use crate::env::ActionLayout;

pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
pub const ACTOR_HEAD_GAIN: f64 = 0.01;
pub const CRITIC_HEAD_GAIN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicy {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    /// Cardinality of each action dimension, in layout order.
    pub cards: Vec<usize>,
}

/// One sampled decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Act {
    pub actions: Vec<usize>,
    pub log_prob: f64,
    pub value: f64,
}

impl AgentPolicy {
    /// `uniform` zeroes the actor head so every unmasked index is equally
    /// likely; used as an untrained baseline.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, layout: &ActionLayout, hidden: &[usize], uniform: bool, rng: &mut R) -> Self {
        let cards = layout.cardinalities();
        let mut a_sizes = vec![obs_dim];
        a_sizes.extend_from_slice(hidden);
        a_sizes.push(layout.total_choices());
        let mut c_sizes = vec![obs_dim];
        c_sizes.extend_from_slice(hidden);
        c_sizes.push(1);
        let head = if uniform { 0.0 } else { ACTOR_HEAD_GAIN };
        let actor = Mlp::new(&a_sizes, HIDDEN_GAIN, head, rng);
        let critic = Mlp::new(&c_sizes, HIDDEN_GAIN, CRITIC_HEAD_GAIN, rng);
        Self {
            actor_opt: Adam::new(actor.params.len()),
            critic_opt: Adam::new(critic.params.len()),
            actor,
            critic,
            cards,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn distribution(&self, obs: &[f64], allowed: &[bool]) -> Result<MaskedMultiCategorical, DistError> {
        MaskedMultiCategorical::new(&self.actor.forward(obs), allowed, &self.cards)
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward(obs)[0]
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], allowed: &[bool], rng: &mut R) -> Result<Act, DistError> {
        let d = self.distribution(obs, allowed)?;
        let actions = d.sample(rng);
        let log_prob = d.log_prob(&actions)?;
        Ok(Act { actions, log_prob, value: self.value(obs) })
    }
}
