//! Actor-critic learners: function approximators, masked softmax policies and
//! the per-agent critic, average-reward and actor updates.

pub mod approx;
pub mod learner;
pub mod policy;

use thiserror::Error;

use crate::env::observe::{Observation, COMPACT_LEN};
use crate::env::topology::HEX_DIRECTIONS;

pub use approx::{grad_check, ApproxSpec, FunctionApproximator, GRAD_CHECK_STEP};
pub use learner::{ActorTarget, AgentLearner, CriticInput, LearnMode, LearnerConfig, StepSize, Transition, UpdateReport};
pub use policy::{grad_log_pi, policy_probs, sample_action, softmax_masked};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Scale applied to raw sector counts so typical features stay near 1.
pub const COUNT_SCALE: f64 = 0.25;

/// Length of [`features`]: bias, sector counts, neighbor-direction flags.
pub const FEATURE_DIM: usize = 1 + COMPACT_LEN + HEX_DIRECTIONS;

/// Feature vector fed to actors and critics.
pub fn features(obs: &Observation) -> Vec<f64> {
    let mut v = Vec::with_capacity(FEATURE_DIM);
    v.push(1.0);
    v.extend(obs.compact.iter().map(|c| c * COUNT_SCALE));
    v.extend(obs.neighbor_dirs.iter().map(|&d| if d { 1.0 } else { 0.0 }));
    v
}
