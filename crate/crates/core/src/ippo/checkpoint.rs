//! Versioned binary checkpoint of every agent's networks and optimizer
//! state.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      8 bytes  "LTEMCKPT"
//! version    u32
//! tech hash  32 bytes
//! iteration  u64
//! obs dim    u64
//! layout     u64 length + JSON bytes
//! agents     u64
//! per agent: actor net, critic net, actor Adam, critic Adam
//!   net:  u64 #sizes, u64 sizes…, u64 #params, f64 params…
//!   adam: u64 t, u64 n, f64 m…, f64 v…
//! sha256     32 bytes over everything above
//! ```

use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use super::adam::Adam;
use super::nn::{param_count, Mlp};
use super::policy::AgentPolicy;
use crate::env::{obs_dim, ActionLayout};
use crate::scenario::Scenario;

pub const MAGIC: &[u8; 8] = b"LTEMCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("technology set differs from the scenario")]
    TechSet,
    #[error("action layout mismatch:\n  checkpoint: {found:?}\n  scenario:   {expected:?}")]
    Layout { expected: Vec<String>, found: Vec<String> },
    #[error("observation size {found}, scenario needs {expected}")]
    ObsDim { expected: usize, found: usize },
    #[error("checkpoint has {found} agents, scenario has {expected}")]
    Agents { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tech_hash: [u8; 32],
    pub iteration: u64,
    pub obs_dim: usize,
    pub layout: ActionLayout,
    pub policies: Vec<AgentPolicy>,
}

impl Checkpoint {
    pub fn new(scenario: &Scenario, iteration: u64, policies: Vec<AgentPolicy>) -> Self {
        Self {
            tech_hash: scenario.tech_set_hash(),
            iteration,
            obs_dim: obs_dim(scenario),
            layout: ActionLayout::from_scenario(scenario),
            policies,
        }
    }

    pub fn check_compatible(&self, scenario: &Scenario) -> Result<(), CheckpointError> {
        if self.tech_hash != scenario.tech_set_hash() {
            let expected = ActionLayout::from_scenario(scenario);
            if expected != self.layout {
                return Err(CheckpointError::Layout { expected: expected.describe(), found: self.layout.describe() });
            }
            return Err(CheckpointError::TechSet);
        }
        let expected = ActionLayout::from_scenario(scenario);
        if expected != self.layout {
            return Err(CheckpointError::Layout { expected: expected.describe(), found: self.layout.describe() });
        }
        let od = obs_dim(scenario);
        if od != self.obs_dim {
            return Err(CheckpointError::ObsDim { expected: od, found: self.obs_dim });
        }
        if self.policies.len() != scenario.agent_count() {
            return Err(CheckpointError::Agents { expected: scenario.agent_count(), found: self.policies.len() });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&self.tech_hash);
        put_u64(&mut b, self.iteration);
        put_u64(&mut b, self.obs_dim as u64);
        let layout = serde_json::to_vec(&self.layout).expect("layout serializes");
        put_u64(&mut b, layout.len() as u64);
        b.extend_from_slice(&layout);
        put_u64(&mut b, self.policies.len() as u64);
        for p in &self.policies {
            put_mlp(&mut b, &p.actor);
            put_mlp(&mut b, &p.critic);
            put_adam(&mut b, &p.actor_opt);
            put_adam(&mut b, &p.critic_opt);
        }
        let digest = Sha256::digest(&b);
        b.extend_from_slice(&digest);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::Corrupt("not a checkpoint file".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(CheckpointError::Corrupt("checksum mismatch".into()));
        }
        let mut r = Reader { b: body, pos: 8 };
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(CheckpointError::Version { found: version, expected: VERSION });
        }
        let tech_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let iteration = r.u64()?;
        let obs_dim = r.u64()? as usize;
        let n = r.len()?;
        let layout: ActionLayout =
            serde_json::from_slice(r.take(n)?).map_err(|e| CheckpointError::Corrupt(format!("layout: {e}")))?;
        let agents = r.len()?;
        let mut policies = Vec::with_capacity(agents.min(1024));
        for _ in 0..agents {
            let actor = r.mlp()?;
            let critic = r.mlp()?;
            let actor_opt = r.adam(actor.params.len())?;
            let critic_opt = r.adam(critic.params.len())?;
            if actor.input_dim() != obs_dim || actor.output_dim() != layout.total_choices() || critic.output_dim() != 1 {
                return Err(CheckpointError::Corrupt("network shape disagrees with the header".into()));
            }
            policies.push(AgentPolicy { actor, critic, actor_opt, critic_opt, cards: layout.cardinalities() });
        }
        if r.pos != body.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Self { tech_hash, iteration, obs_dim, layout, policies })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp).map_err(io)?;
            f.write_all(&self.to_bytes()).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}

fn put_u64(b: &mut Vec<u8>, v: u64) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(b: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        b.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_mlp(b: &mut Vec<u8>, m: &Mlp) {
    put_u64(b, m.sizes.len() as u64);
    for s in &m.sizes {
        put_u64(b, *s as u64);
    }
    put_u64(b, m.params.len() as u64);
    put_f64s(b, &m.params);
}

fn put_adam(b: &mut Vec<u8>, a: &Adam) {
    put_u64(b, a.t);
    put_u64(b, a.m.len() as u64);
    put_f64s(b, &a.m);
    put_f64s(b, &a.v);
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.b.len());
        let end = end.ok_or_else(|| CheckpointError::Corrupt("truncated".into()))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A count that must fit in the remaining bytes.
    fn len(&mut self) -> Result<usize, CheckpointError> {
        let n = self.u64()?;
        if n > self.b.len() as u64 {
            return Err(CheckpointError::Corrupt("length field out of range".into()));
        }
        Ok(n as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| CheckpointError::Corrupt("overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn mlp(&mut self) -> Result<Mlp, CheckpointError> {
        let n = self.len()?;
        let sizes = (0..n).map(|_| self.u64().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        let np = self.len()?;
        if sizes.len() < 2 || param_count(&sizes) != np {
            return Err(CheckpointError::Corrupt("network sizes disagree with parameter count".into()));
        }
        Ok(Mlp { sizes, params: self.f64s(np)? })
    }

    fn adam(&mut self, expected: usize) -> Result<Adam, CheckpointError> {
        let t = self.u64()?;
        let n = self.len()?;
        if n != expected {
            return Err(CheckpointError::Corrupt("optimizer state size".into()));
        }
        Ok(Adam { m: self.f64s(n)?, v: self.f64s(n)?, t })
    }
}
