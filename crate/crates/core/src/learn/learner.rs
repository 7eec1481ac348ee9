//! Per-agent actor-critic with episodic (discounted) and average-reward
//! (differential) critic targets.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::approx::{ApproxSpec, FunctionApproximator};
use super::policy::{grad_log_pi, policy_probs};
use super::LearnError;

/// Step-size schedule `c / t^p` (`p = 0` is a constant step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSize {
    pub c: f64,
    #[serde(default)]
    pub p: f64,
}

impl StepSize {
    pub const fn constant(c: f64) -> Self {
        Self { c, p: 0.0 }
    }

    pub const fn decaying(c: f64, p: f64) -> Self {
        Self { c, p }
    }

    /// Step at update count `t` (1-based).
    pub fn at(&self, t: u64) -> f64 {
        if self.p == 0.0 {
            self.c
        } else {
            self.c / (t.max(1) as f64).powf(self.p)
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.c > 0.0) {
            return Err(LearnError::Config("step size must be positive".into()));
        }
        if self.p != 0.0 && !(self.p > 0.5 && self.p <= 1.0) {
            return Err(LearnError::Config(format!("decay exponent {} outside (0.5, 1]", self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnMode {
    Episodic,
    AverageReward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticInput {
    /// `Q(o_i, a_i)`
    SelfOnly,
    /// `Q(o_i, a_i, a_-i)` with an encoding of the neighbors' actions appended to the input.
    WithNeighborActions,
}

/// Which critic evaluation scales the policy-gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorTarget {
    /// `Q(o_t, a_t)`
    Current,
    /// `Q(o_{t+1}, a_{t+1})`, the printed form of the actor update.
    Next,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub alpha_theta: StepSize,
    pub alpha_omega: StepSize,
    pub alpha_r: StepSize,
    pub mode: LearnMode,
    pub critic_input: CriticInput,
    pub use_baseline: bool,
    pub actor_target: ActorTarget,
    pub approximator: ApproxSpec,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha_theta: StepSize::constant(1e-3),
            alpha_omega: StepSize::constant(1e-2),
            alpha_r: StepSize::constant(1e-3),
            mode: LearnMode::AverageReward,
            critic_input: CriticInput::SelfOnly,
            use_baseline: false,
            actor_target: ActorTarget::Current,
            approximator: ApproxSpec::Linear,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(LearnError::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        self.alpha_theta.validate()?;
        self.alpha_omega.validate()?;
        self.alpha_r.validate()?;
        if let ApproxSpec::Mlp { hidden } = &self.approximator {
            if hidden.contains(&0) {
                return Err(LearnError::Config("MLP hidden layers must be non-empty".into()));
            }
        }
        Ok(())
    }
}

/// One on-policy interaction as seen by a single agent. Actions are
/// canonical slot indices; `mask` marks the slots this agent may use.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_action: usize,
    /// Encoding of the neighbors' actions at `t`; used for both critic
    /// evaluations when the critic takes neighbor actions.
    pub neighbor_actions: Option<Vec<f64>>,
    /// Last step of an episode; the discounted target does not bootstrap.
    pub terminal: bool,
}

/// What an update changed, for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateReport {
    pub td_error: f64,
    pub actor_signal: f64,
}

fn bootstrap(tr: &Transition, next: f64) -> f64 {
    if tr.terminal {
        0.0
    } else {
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLearner {
    pub actor: FunctionApproximator,
    pub critic: FunctionApproximator,
    /// State-value head used as an advantage baseline.
    pub baseline: Option<FunctionApproximator>,
    pub r_hat: f64,
    pub steps: u64,
    /// Recent observations kept for the covariance-alignment regularizer.
    pub recent_obs: VecDeque<Vec<f64>>,
    neighbor_dim: usize,
}

impl AgentLearner {
    pub fn new<R: Rng + ?Sized>(
        cfg: &LearnerConfig,
        obs_dim: usize,
        n_slots: usize,
        neighbor_dim: usize,
        rng: &mut R,
    ) -> Self {
        let critic_in = match cfg.critic_input {
            CriticInput::SelfOnly => obs_dim,
            CriticInput::WithNeighborActions => obs_dim + neighbor_dim,
        };
        let actor = FunctionApproximator::init(&cfg.approximator, obs_dim, n_slots, rng);
        let critic = FunctionApproximator::init(&cfg.approximator, critic_in, n_slots, rng);
        let baseline = cfg
            .use_baseline
            .then(|| FunctionApproximator::init(&cfg.approximator, obs_dim, 1, rng));
        Self {
            actor,
            critic,
            baseline,
            r_hat: 0.0,
            steps: 0,
            recent_obs: VecDeque::new(),
            neighbor_dim,
        }
    }

    pub fn policy(&self, obs: &[f64], mask: &[bool]) -> Result<Vec<f64>, LearnError> {
        policy_probs(&self.actor, obs, mask)
    }

    fn critic_input(&self, obs: &[f64], neighbor: Option<&[f64]>) -> Result<Vec<f64>, LearnError> {
        if self.critic.input_dim() == self.actor.input_dim() {
            return Ok(obs.to_vec());
        }
        let nb = neighbor.ok_or_else(|| {
            LearnError::Config("critic takes neighbor actions but none were supplied".into())
        })?;
        if nb.len() != self.neighbor_dim {
            return Err(LearnError::Dimension { expected: self.neighbor_dim, got: nb.len() });
        }
        let mut x = Vec::with_capacity(obs.len() + nb.len());
        x.extend_from_slice(obs);
        x.extend_from_slice(nb);
        Ok(x)
    }

    /// Critic estimate for `action` at `obs`. In self-only mode any neighbor
    /// encoding is ignored.
    pub fn critic_value(&self, obs: &[f64], action: usize, neighbor: Option<&[f64]>) -> Result<f64, LearnError> {
        let x = self.critic_input(obs, neighbor)?;
        self.critic.forward_one(&x, action)
    }

    fn critic_pair(&self, tr: &Transition) -> Result<(f64, f64, Vec<f64>), LearnError> {
        let nb = tr.neighbor_actions.as_deref();
        let x = self.critic_input(&tr.obs, nb)?;
        let q = self.critic.forward_one(&x, tr.action)?;
        let q_next = self.critic_value(&tr.next_obs, tr.next_action, nb)?;
        Ok((q, q_next, x))
    }

    fn critic_step(&mut self, x: &[f64], action: usize, td: f64, step: f64) -> Result<(), LearnError> {
        if td == 0.0 {
            return Ok(());
        }
        let mut onehot = vec![0.0; self.critic.output_dim()];
        onehot[action] = 1.0;
        let g = self.critic.vjp(x, &onehot)?;
        self.critic.add_scaled(&g, step * td);
        Ok(())
    }

    /// Discounted TD error `r + gamma Q(next) - Q(cur)`.
    pub fn td_error_episodic(&self, tr: &Transition, cfg: &LearnerConfig) -> Result<f64, LearnError> {
        let (q, q_next, _) = self.critic_pair(tr)?;
        Ok(tr.reward + cfg.gamma * bootstrap(tr, q_next) - q)
    }

    /// Differential TD error `r - r_hat + Q(next) - Q(cur)`.
    pub fn td_error_average(&self, tr: &Transition) -> Result<f64, LearnError> {
        let (q, q_next, _) = self.critic_pair(tr)?;
        Ok(tr.reward - self.r_hat + q_next - q)
    }

    /// Critic step on the discounted TD error; only the critic changes.
    pub fn td_update_episodic(&mut self, tr: &Transition, cfg: &LearnerConfig) -> Result<f64, LearnError> {
        let (q, q_next, x) = self.critic_pair(tr)?;
        let td = tr.reward + cfg.gamma * bootstrap(tr, q_next) - q;
        let step = cfg.alpha_omega.at(self.steps + 1);
        self.critic_step(&x, tr.action, td, step)?;
        Ok(td)
    }

    /// Critic step on the differential TD error; only the critic changes.
    pub fn td_update_average(&mut self, tr: &Transition, cfg: &LearnerConfig) -> Result<f64, LearnError> {
        let (q, q_next, x) = self.critic_pair(tr)?;
        let td = tr.reward - self.r_hat + q_next - q;
        let step = cfg.alpha_omega.at(self.steps + 1);
        self.critic_step(&x, tr.action, td, step)?;
        Ok(td)
    }

    /// `r_hat += alpha_r * (r - r_hat + Q(next) - Q(cur))`; only `r_hat` changes.
    pub fn avg_reward_update(&mut self, tr: &Transition, cfg: &LearnerConfig) -> Result<f64, LearnError> {
        let td = self.td_error_average(tr)?;
        self.r_hat += cfg.alpha_r.at(self.steps + 1) * td;
        Ok(td)
    }

    fn baseline_value(&self, obs: &[f64]) -> Result<f64, LearnError> {
        match &self.baseline {
            Some(v) => v.forward_one(obs, 0),
            None => Ok(0.0),
        }
    }

    /// Scalar that multiplies `grad log pi` in the actor step.
    pub fn actor_signal(&self, tr: &Transition, cfg: &LearnerConfig) -> Result<f64, LearnError> {
        let nb = tr.neighbor_actions.as_deref();
        let q = match cfg.actor_target {
            ActorTarget::Current => self.critic_value(&tr.obs, tr.action, nb)?,
            ActorTarget::Next => self.critic_value(&tr.next_obs, tr.next_action, nb)?,
        };
        Ok(q - self.baseline_value(&tr.obs)?)
    }

    /// Ascent direction of the actor: `grad log pi(a|o) * G`.
    pub fn actor_direction(&self, tr: &Transition, cfg: &LearnerConfig) -> Result<(Vec<f64>, f64), LearnError> {
        let signal = self.actor_signal(tr, cfg)?;
        let mut dir = grad_log_pi(&self.actor, &tr.obs, &tr.mask, tr.action)?;
        for d in &mut dir {
            *d *= signal;
        }
        Ok((dir, signal))
    }

    /// Actor step; `extra` is added to the ascent direction before scaling
    /// (the personalization regularizer uses it). Only the actor changes.
    pub fn actor_update(&mut self, tr: &Transition, cfg: &LearnerConfig, extra: Option<&[f64]>) -> Result<f64, LearnError> {
        let (mut dir, signal) = self.actor_direction(tr, cfg)?;
        if let Some(e) = extra {
            for (d, x) in dir.iter_mut().zip(e) {
                *d += x;
            }
        }
        self.actor.add_scaled(&dir, cfg.alpha_theta.at(self.steps + 1));
        Ok(signal)
    }

    fn baseline_update(&mut self, tr: &Transition, cfg: &LearnerConfig, r_hat: f64) -> Result<(), LearnError> {
        let step = cfg.alpha_omega.at(self.steps + 1);
        if let Some(v) = &mut self.baseline {
            let cur = v.forward_one(&tr.obs, 0)?;
            let next = v.forward_one(&tr.next_obs, 0)?;
            let td = match cfg.mode {
                LearnMode::Episodic => tr.reward + cfg.gamma * bootstrap(tr, next) - cur,
                LearnMode::AverageReward => tr.reward - r_hat + next - cur,
            };
            if td != 0.0 {
                let g = v.vjp(&tr.obs, &[1.0])?;
                v.add_scaled(&g, step * td);
            }
        }
        Ok(())
    }

    /// Full per-step update for the configured mode. Every quantity is
    /// computed from the parameters held at entry, then the critic, average
    /// reward, baseline and actor are stepped.
    pub fn update(&mut self, tr: &Transition, cfg: &LearnerConfig, actor_extra: Option<&[f64]>) -> Result<UpdateReport, LearnError> {
        let r_hat = self.r_hat;
        let (actor_dir, signal) = self.actor_direction(tr, cfg)?;
        let td = match cfg.mode {
            LearnMode::Episodic => self.td_update_episodic(tr, cfg)?,
            LearnMode::AverageReward => {
                let td = self.td_update_average(tr, cfg)?;
                self.r_hat += cfg.alpha_r.at(self.steps + 1) * td;
                td
            }
        };
        self.baseline_update(tr, cfg, r_hat)?;
        let mut dir = actor_dir;
        if let Some(e) = actor_extra {
            for (d, x) in dir.iter_mut().zip(e) {
                *d += x;
            }
        }
        self.actor.add_scaled(&dir, cfg.alpha_theta.at(self.steps + 1));
        self.steps += 1;
        if !self.is_finite() {
            return Err(LearnError::Numerical(format!(
                "non-finite parameters after update {} (td {td}, signal {signal})",
                self.steps
            )));
        }
        Ok(UpdateReport { td_error: td, actor_signal: signal })
    }

    pub fn record_observation(&mut self, obs: &[f64], window: usize) {
        if window == 0 {
            return;
        }
        while self.recent_obs.len() >= window {
            self.recent_obs.pop_front();
        }
        self.recent_obs.push_back(obs.to_vec());
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite()
            && self.critic.is_finite()
            && self.baseline.as_ref().is_none_or(|b| b.is_finite())
            && self.r_hat.is_finite()
    }

    /// Actor, critic, baseline parameters and `r_hat`, concatenated in that order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_flat());
        v.extend_from_slice(self.actor.params());
        v.extend_from_slice(self.critic.params());
        if let Some(b) = &self.baseline {
            v.extend_from_slice(b.params());
        }
        v.push(self.r_hat);
        v
    }

    pub fn n_flat(&self) -> usize {
        self.actor.n_params() + self.critic.n_params() + self.baseline.as_ref().map_or(0, |b| b.n_params()) + 1
    }
}
