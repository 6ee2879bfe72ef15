use super::*;
use crate::env::{obs_dim, ActionLayout};
use crate::ids::TechId;
use crate::scenario::{testing, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn small() -> Arc<Scenario> {
    Arc::new(testing::scenario(&[TechId::Solar, TechId::Ccgt], 2))
}

fn cfg(batch: usize) -> TrainConfig {
    TrainConfig { batch_size: batch, hidden: vec![16, 16], epochs: 2, iterations: 2, num_envs: 2, seed: 11, ..Default::default() }
}

#[test]
fn one_env_one_episode_per_batch() {
    let s = small();
    let mut t = Trainer::new(Arc::clone(&s), cfg(s.total_steps())).unwrap();
    let m = t.iterate().unwrap();
    assert_eq!(m.agents.len(), 2);
    assert_eq!((m.episodes, m.env_steps), (1, s.total_steps() as u64));
    assert_eq!(m.agents[0].min_reward, m.agents[0].max_reward);
}

#[test]
fn collection_independent_of_pool_size() {
    let s = small();
    let t = Trainer::new(Arc::clone(&s), cfg(100)).unwrap();
    let refs: Vec<&AgentPolicy> = t.policies.iter().collect();
    let seeds = [1, 2, 3, 4, 5];
    let a = collect(&s, &refs, &seeds, 1, true, true).unwrap();
    let b = collect(&s, &refs, &seeds, 4, true, true).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.samples, y.samples);
        assert_eq!(x.infos, y.infos);
        assert_eq!(x.returns, y.returns);
    }
}

#[test]
fn agents_update_independently() {
    let s = small();
    let mut t = Trainer::new(Arc::clone(&s), cfg(s.total_steps())).unwrap();
    let refs: Vec<&AgentPolicy> = t.policies.iter().collect();
    let mut tr = collect(&s, &refs, &[9], 1, true, false).unwrap().remove(0);
    for smp in tr.samples.iter_mut() {
        let r: Vec<f64> = smp.iter().map(|x| x.reward).collect();
        let v: Vec<f64> = smp.iter().map(|x| x.old_value).collect();
        let (vt, adv) = compute_targets(&r, &v, 1.0, 0.995);
        for (k, x) in smp.iter_mut().enumerate() {
            x.v_target = vt[k];
            x.advantage = adv[k];
        }
    }
    let c = t.config().clone();
    let (mut p0, mut p1) = (t.policies[0].clone(), t.policies[1].clone());
    train::update_agent(&mut p0, &tr.samples[0], &c, 1).unwrap();
    train::update_agent(&mut p1, &tr.samples[1], &c, 2).unwrap();
    let (mut q1, mut q0) = (t.policies[1].clone(), t.policies[0].clone());
    train::update_agent(&mut q1, &tr.samples[1], &c, 2).unwrap();
    train::update_agent(&mut q0, &tr.samples[0], &c, 1).unwrap();
    assert_eq!(p0, q0);
    assert_eq!(p1, q1);
    t.policies[0] = p0;
}

#[test]
fn ratios_stay_near_one_after_a_single_epoch() {
    let s = small();
    let c = TrainConfig { batch_size: s.total_steps() * 4, epochs: 1, hidden: vec![32, 32], seed: 4, ..Default::default() };
    let t = Trainer::new(Arc::clone(&s), c.clone()).unwrap();
    let refs: Vec<&AgentPolicy> = t.policies.iter().collect();
    let traces = collect(&s, &refs, &[1, 2, 3, 4], 4, true, false).unwrap();
    let mut samples: Vec<loss::Sample> = Vec::new();
    for tr in &traces {
        let mut smp = tr.samples[0].clone();
        let r: Vec<f64> = smp.iter().map(|x| x.reward).collect();
        let v: Vec<f64> = smp.iter().map(|x| x.old_value).collect();
        let (vt, adv) = compute_targets(&r, &v, 1.0, 0.995);
        for (k, x) in smp.iter_mut().enumerate() {
            x.v_target = vt[k];
            x.advantage = adv[k];
        }
        samples.extend(smp);
    }
    let mut p = t.policies[0].clone();
    train::update_agent(&mut p, &samples, &c, 0).unwrap();
    let inside = samples
        .iter()
        .filter(|x| {
            let lp = p.distribution(&x.obs, &x.mask).unwrap().log_prob(&x.actions).unwrap();
            let r = (lp - x.old_log_prob).exp();
            (0.85..=1.15).contains(&r)
        })
        .count();
    assert!(inside as f64 >= 0.99 * samples.len() as f64);
}

#[test]
fn zero_budget_writes_initial_checkpoint_only() {
    let s = small();
    let dir = tempfile::tempdir().unwrap();
    let c = TrainConfig { iterations: 0, ..cfg(100) };
    let sum = train(Arc::clone(&s), c, dir.path()).unwrap();
    assert_eq!(sum.checkpoints.len(), 1);
    assert_eq!(std::fs::read_to_string(&sum.metrics).unwrap(), "");
    let ck = Checkpoint::load(&sum.final_checkpoint).unwrap();
    assert_eq!(ck.iteration, 0);
    ck.check_compatible(&s).unwrap();
}

#[test]
fn training_reruns_identically() {
    let s = small();
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let sum = train(Arc::clone(&s), cfg(100), dir.path()).unwrap();
        (std::fs::read(&sum.metrics).unwrap(), std::fs::read(&sum.final_checkpoint).unwrap())
    };
    let (m1, c1) = run();
    let (m2, c2) = run();
    assert_eq!(m1, m2);
    assert_eq!(c1, c2);
    assert_eq!(String::from_utf8(m1).unwrap().lines().count(), 2);
}

#[test]
fn uniform_policy_is_uniform_over_allowed() {
    let s = small();
    let l = ActionLayout::from_scenario(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = AgentPolicy::new(obs_dim(&s), &l, &[8], true, &mut rng);
    let d = p.distribution(&vec![0.3; obs_dim(&s)], &vec![true; l.total_choices()]).unwrap();
    for (lp, dim) in d.log_probs.iter().zip(&l.dims) {
        for v in lp {
            assert!((v.exp() - 1.0 / dim.steps as f64).abs() < 1e-12);
        }
    }
}
