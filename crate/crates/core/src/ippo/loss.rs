//! Clipped-surrogate objective with entropy bonus and value regression,
//! with analytic gradients for both networks.

use rayon::prelude::*;
use thiserror::Error;

use super::dist::{DistError, MaskedMultiCategorical};
use super::nn::Cache;
use super::policy::AgentPolicy;

/// One agent-step of experience.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub mask: Vec<bool>,
    pub actions: Vec<usize>,
    pub old_log_prob: f64,
    pub old_value: f64,
    pub reward: f64,
    pub advantage: f64,
    pub v_target: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossCoefs {
    pub clip: f64,
    pub entropy: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    /// `−L_CLIP`.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("non-finite loss")]
    NonFinite,
}

pub struct LossGrads {
    pub stats: LossStats,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

const CHUNK: usize = 32;

/// `loss = −L_CLIP − h·H + v·MSE`, averaged over `batch`. `adv[k]` is the
/// (already normalized) advantage of `batch[k]`.
pub fn ppo_loss(policy: &AgentPolicy, batch: &[&Sample], adv: &[f64], c: LossCoefs) -> Result<LossGrads, LossError> {
    assert_eq!(batch.len(), adv.len());
    let n = batch.len() as f64;
    let na = policy.actor.params.len();
    let nc = policy.critic.params.len();
    let parts: Vec<Result<(LossStats, Vec<f64>, Vec<f64>), LossError>> = batch
        .par_chunks(CHUNK)
        .zip(adv.par_chunks(CHUNK))
        .map(|(bs, ads)| {
            let mut ga = vec![0.0; na];
            let mut gc = vec![0.0; nc];
            let mut st = LossStats::default();
            let mut ca = Cache::default();
            let mut cc = Cache::default();
            let mut glog = vec![0.0; policy.actor.output_dim()];
            for (s, &a) in bs.iter().zip(ads) {
                let logits = policy.actor.forward_cached(&s.obs, &mut ca);
                let d = MaskedMultiCategorical::new(&logits, &s.mask, &policy.cards)?;
                let lp = d.log_prob(&s.actions)?;
                let ratio = (lp - s.old_log_prob).exp();
                let clipped = ratio.clamp(1.0 - c.clip, 1.0 + c.clip);
                let (unc, clp) = (ratio * a, clipped * a);
                let surrogate = unc.min(clp);
                let h = d.entropy();
                glog.iter_mut().for_each(|g| *g = 0.0);
                if unc <= clp {
                    d.grad_log_prob(&s.actions, &mut glog, -a * ratio / n);
                } else {
                    st.clip_fraction += 1.0;
                }
                d.grad_entropy(&mut glog, -c.entropy / n);
                policy.actor.backward(&ca, &glog, &mut ga);

                let v = policy.critic.forward_cached(&s.obs, &mut cc)[0];
                let err = v - s.v_target;
                policy.critic.backward(&cc, &[c.value * 2.0 * err / n], &mut gc);

                st.policy_loss -= surrogate;
                st.entropy += h;
                st.value_loss += err * err;
            }
            Ok((st, ga, gc))
        })
        .collect();

    let mut actor = vec![0.0; na];
    let mut critic = vec![0.0; nc];
    let mut st = LossStats::default();
    for p in parts {
        let (s, ga, gc) = p?;
        st.policy_loss += s.policy_loss;
        st.entropy += s.entropy;
        st.value_loss += s.value_loss;
        st.clip_fraction += s.clip_fraction;
        for (x, y) in actor.iter_mut().zip(&ga) {
            *x += y;
        }
        for (x, y) in critic.iter_mut().zip(&gc) {
            *x += y;
        }
    }
    st.policy_loss /= n;
    st.entropy /= n;
    st.value_loss /= n;
    st.clip_fraction /= n;
    st.loss = st.policy_loss - c.entropy * st.entropy + c.value * st.value_loss;
    if !st.loss.is_finite() || actor.iter().chain(&critic).any(|g| !g.is_finite()) {
        return Err(LossError::NonFinite);
    }
    Ok(LossGrads { stats: st, actor, critic })
}

/// Zero mean, unit variance; a constant vector maps to zeros.
pub fn normalize(adv: &[f64]) -> Vec<f64> {
    let n = adv.len().max(1) as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    adv.iter().map(|a| (a - mean) / (sd + 1e-8)).collect()
}
