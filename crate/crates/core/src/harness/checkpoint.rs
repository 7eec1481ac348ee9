//! Binary checkpoints of learner parameters.
//!
//! Layout: the magic `FMRL`, a little-endian `u32` version, a `u32` header
//! length, a JSON header, then per agent the actor, critic and baseline
//! parameters followed by `r_hat`, all as little-endian `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::learn::AgentLearner;

pub const MAGIC: &[u8; 4] = b"FMRL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config_hash: String,
    n_agents: usize,
    actor_len: usize,
    critic_len: usize,
    baseline_len: usize,
}

/// Parameters of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub baseline: Vec<f64>,
    pub r_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub agents: Vec<AgentParams>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_agents(config_hash: String, agents: &[AgentLearner]) -> Self {
        let agents = agents
            .iter()
            .map(|a| AgentParams {
                actor: a.actor.params().to_vec(),
                critic: a.critic.params().to_vec(),
                baseline: a.baseline.as_ref().map(|b| b.params().to_vec()).unwrap_or_default(),
                r_hat: a.r_hat,
            })
            .collect();
        Self { config_hash, agents }
    }

    fn header(&self) -> Header {
        let first = self.agents.first();
        Header {
            config_hash: self.config_hash.clone(),
            n_agents: self.agents.len(),
            actor_len: first.map_or(0, |a| a.actor.len()),
            critic_len: first.map_or(0, |a| a.critic.len()),
            baseline_len: first.map_or(0, |a| a.baseline.len()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.agents {
            for v in a.actor.iter().chain(&a.critic).chain(&a.baseline).chain(std::iter::once(&a.r_hat)) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint; `expected_hash` rejects files from another config.
    pub fn from_bytes(bytes: &[u8], expected_hash: Option<&str>) -> Result<Self, HarnessError> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let h: Header = serde_json::from_slice(body).map_err(|e| bad(format!("bad header: {e}")))?;
        if let Some(want) = expected_hash {
            if want != h.config_hash {
                return Err(bad(format!("config hash mismatch: file {}, expected {want}", h.config_hash)));
            }
        }
        let per = h.actor_len + h.critic_len + h.baseline_len + 1;
        let data = &bytes[12 + hlen..];
        if data.len() != h.n_agents * per * 8 {
            return Err(bad(format!("expected {} parameter bytes, found {}", h.n_agents * per * 8, data.len())));
        }
        let vals: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let agents = vals
            .chunks_exact(per)
            .map(|c| {
                let (actor, rest) = c.split_at(h.actor_len);
                let (critic, rest) = rest.split_at(h.critic_len);
                let (baseline, rest) = rest.split_at(h.baseline_len);
                AgentParams { actor: actor.to_vec(), critic: critic.to_vec(), baseline: baseline.to_vec(), r_hat: rest[0] }
            })
            .collect();
        Ok(Self { config_hash: h.config_hash, agents })
    }

    /// Copies the stored parameters into freshly built learners.
    pub fn apply_to(&self, agents: &mut [AgentLearner]) -> Result<(), HarnessError> {
        if agents.len() != self.agents.len() {
            return Err(bad(format!("checkpoint has {} agents, run has {}", self.agents.len(), agents.len())));
        }
        for (a, p) in agents.iter_mut().zip(&self.agents) {
            a.actor.set_params(&p.actor).map_err(|e| bad(e.to_string()))?;
            a.critic.set_params(&p.critic).map_err(|e| bad(e.to_string()))?;
            match &mut a.baseline {
                Some(b) => b.set_params(&p.baseline).map_err(|e| bad(e.to_string()))?,
                None if p.baseline.is_empty() => {}
                None => return Err(bad("checkpoint has a baseline head, run does not")),
            }
            a.r_hat = p.r_hat;
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), HarnessError> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected_hash: Option<&str>) -> Result<Checkpoint, HarnessError> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes, expected_hash)
}
