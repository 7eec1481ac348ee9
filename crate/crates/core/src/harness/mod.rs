//! Experiment orchestration: configuration, seeding, the training loop,
//! metrics and checkpoints.

pub mod checkpoint;
pub mod run;
pub mod tools;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{ChannelConfig, EnvConfig, EnvError, ObservationConfig, RewardConfig, TopologyConfig, TrafficConfig};
use crate::federation::{FedError, FederationConfig};
use crate::info::{InfoError, InfoParams};
use crate::learn::{LearnError, LearnerConfig};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use run::{run_experiment, write_outputs, MetricsRow, RunResult};
pub use tools::{evaluate_baseline, BoundRequest, gradient_audit, sweep_fed, BaselineSummary, FedSweepRow, GradAudit};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("numerical failure at step {step}: {source}")]
    Numerical { step: u64, source: LearnError },
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<FedError> for HarnessError {
    fn from(e: FedError) -> Self {
        match e {
            FedError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<InfoError> for HarnessError {
    fn from(e: InfoError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// One continuing interaction, never reset.
    NonEpisodic,
    /// The world is reset every `episode_horizon` steps.
    Episodic,
}

/// Who chooses the joint action during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Per-AP actor-critic learners.
    Learned,
    /// Uniform random requests, for reference runs.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub total_steps: u64,
    pub eval_every: u64,
    pub mode: RunMode,
    pub episode_horizon: u64,
    pub policy: PolicyKind,
    /// Stop early once the mean reward of the last `plateau_mean_window`
    /// steps has not improved for this many steps (0 disables).
    pub plateau_patience: u64,
    pub plateau_mean_window: u64,
    pub topology: TopologyConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub reward: RewardConfig,
    pub observation: ObservationConfig,
    pub learner: LearnerConfig,
    pub federation: FederationConfig,
    pub info: InfoParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: 200_000,
            eval_every: 1000,
            mode: RunMode::NonEpisodic,
            episode_horizon: 512,
            policy: PolicyKind::Learned,
            plateau_patience: 0,
            plateau_mean_window: 1000,
            topology: TopologyConfig::default(),
            channel: ChannelConfig::default(),
            traffic: TrafficConfig::default(),
            reward: RewardConfig::default(),
            observation: ObservationConfig::default(),
            learner: LearnerConfig::default(),
            federation: FederationConfig::default(),
            info: InfoParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            topology: self.topology.clone(),
            channel: self.channel.clone(),
            traffic: self.traffic.clone(),
            reward: self.reward.clone(),
            observation: self.observation.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.eval_every == 0 {
            return Err(HarnessError::Config("eval_every must be at least 1".into()));
        }
        if self.mode == RunMode::Episodic && self.episode_horizon == 0 {
            return Err(HarnessError::Config("episode_horizon must be at least 1".into()));
        }
        if self.plateau_patience > 0 && self.plateau_mean_window == 0 {
            return Err(HarnessError::Config("plateau_mean_window must be at least 1".into()));
        }
        self.topology.validate()?;
        self.channel.validate()?;
        self.traffic.validate()?;
        self.reward.validate()?;
        self.learner.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.federation.validate()?;
        self.info.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `stream`: the `stream + 1`-th output of a SplitMix64
/// generator started at `master`. Stream 0 drives the environment and
/// stream `i + 1` drives agent `i`, so adding agents leaves earlier streams
/// untouched.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
