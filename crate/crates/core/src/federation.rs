//! Parameter aggregation across agents: periodic FedAvg (full or critic-only)
//! and covariance-alignment (CORAL) personalization of the actors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{AgentLearner, FunctionApproximator, LearnError, LearnerConfig, Transition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FedError {
    #[error("nothing to average")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("covariance needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("no global model has been taken yet")]
    NoGlobalModel,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FederationMode {
    None,
    FedavgFull,
    FedavgCriticOnly,
    CoralPersonalized,
}

impl FederationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FederationMode::None => "none",
            FederationMode::FedavgFull => "fedavg_full",
            FederationMode::FedavgCriticOnly => "fedavg_critic_only",
            FederationMode::CoralPersonalized => "coral_personalized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub period_f: u64,
    pub mode: FederationMode,
    /// Weight of the CORAL penalty in the personalized actor step.
    pub coral_weight: f64,
    /// Number of recent observations the CORAL statistics are taken over.
    pub coral_window: usize,
    /// In personalized mode, also hard-average critics, baselines and `r_hat`.
    pub coral_average_critic: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            period_f: 20,
            mode: FederationMode::FedavgFull,
            coral_weight: 0.1,
            coral_window: 32,
            coral_average_critic: false,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<(), FedError> {
        if self.period_f == 0 {
            return Err(FedError::Config("period_f must be at least 1".into()));
        }
        if !(self.coral_weight >= 0.0) || !self.coral_weight.is_finite() {
            return Err(FedError::Config("coral_weight must be a finite non-negative number".into()));
        }
        if self.mode == FederationMode::CoralPersonalized && self.coral_window < 2 {
            return Err(FedError::Config("coral_window must be at least 2".into()));
        }
        Ok(())
    }

    pub fn fires_at(&self, t: u64) -> bool {
        self.mode != FederationMode::None && t >= 1 && t.is_multiple_of(self.period_f)
    }
}

/// Elementwise mean in agent order. Computed as an offset from the first
/// vector and clamped to the per-component range, so identical inputs come
/// back bit-exact and no component leaves the inputs' convex hull.
pub fn fed_average(params: &[&[f64]]) -> Result<Vec<f64>, FedError> {
    let first = *params.first().ok_or(FedError::Empty)?;
    let d = first.len();
    if let Some(bad) = params.iter().find(|p| p.len() != d) {
        return Err(FedError::Dimension { expected: d, got: bad.len() });
    }
    let n = params.len() as f64;
    Ok((0..d)
        .map(|k| {
            let x0 = first[k];
            let (mut lo, mut hi, mut acc) = (x0, x0, 0.0);
            for p in params {
                lo = lo.min(p[k]);
                hi = hi.max(p[k]);
                acc += p[k] - x0;
            }
            (x0 + acc / n).clamp(lo, hi)
        })
        .collect())
}

fn average_approx(items: &[&FunctionApproximator]) -> Result<FunctionApproximator, FedError> {
    let views: Vec<&[f64]> = items.iter().map(|a| a.params()).collect();
    let mean = fed_average(&views)?;
    let mut out = items[0].clone();
    out.set_params(&mean)?;
    Ok(out)
}

/// Averaged parameters taken at the last sync.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub actor: FunctionApproximator,
    pub critic: FunctionApproximator,
    pub baseline: Option<FunctionApproximator>,
    pub r_hat: f64,
    pub taken_at: u64,
}

impl GlobalModel {
    pub fn average(agents: &[AgentLearner], t: u64) -> Result<Self, FedError> {
        if agents.is_empty() {
            return Err(FedError::Empty);
        }
        let actor = average_approx(&agents.iter().map(|a| &a.actor).collect::<Vec<_>>())?;
        let critic = average_approx(&agents.iter().map(|a| &a.critic).collect::<Vec<_>>())?;
        let baseline = match agents.iter().map(|a| a.baseline.as_ref()).collect::<Option<Vec<_>>>() {
            Some(b) => Some(average_approx(&b)?),
            None if agents.iter().all(|a| a.baseline.is_none()) => None,
            None => return Err(FedError::Config("agents disagree on the baseline head".into())),
        };
        let r = fed_average(&agents.iter().map(|a| std::slice::from_ref(&a.r_hat)).collect::<Vec<_>>())?[0];
        Ok(Self { actor, critic, baseline, r_hat: r, taken_at: t })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncEvent {
    pub step: u64,
    pub mode: FederationMode,
    pub norm_before: f64,
    pub norm_after: f64,
}

fn total_norm(agents: &[AgentLearner]) -> f64 {
    agents
        .iter()
        .flat_map(|a| a.flat_params())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Federation barrier at step `t`. Fires iff `t % period_f == 0`; returns the
/// logged event when it did.
pub fn sync(
    agents: &mut [AgentLearner],
    cfg: &FederationConfig,
    t: u64,
    global: &mut Option<GlobalModel>,
) -> Result<Option<SyncEvent>, FedError> {
    if !cfg.fires_at(t) || agents.is_empty() {
        return Ok(None);
    }
    let norm_before = total_norm(agents);
    let g = GlobalModel::average(agents, t)?;
    let (actor, critic) = match cfg.mode {
        FederationMode::None => (false, false),
        FederationMode::FedavgFull => (true, true),
        FederationMode::FedavgCriticOnly => (false, true),
        FederationMode::CoralPersonalized => (false, cfg.coral_average_critic),
    };
    for a in agents.iter_mut() {
        if actor {
            a.actor.set_params(g.actor.params())?;
        }
        if critic {
            a.critic.set_params(g.critic.params())?;
            if let (Some(b), Some(gb)) = (&mut a.baseline, &g.baseline) {
                b.set_params(gb.params())?;
            }
            a.r_hat = g.r_hat;
        }
    }
    *global = Some(g);
    Ok(Some(SyncEvent { step: t, mode: cfg.mode, norm_before, norm_after: total_norm(agents) }))
}

fn check_batch(x: &[Vec<f64>]) -> Result<usize, FedError> {
    if x.len() < 2 {
        return Err(FedError::BatchTooSmall(x.len()));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(FedError::Dimension { expected: d, got: bad.len() });
    }
    Ok(d)
}

/// Column-centered copy of `x` and its sample covariance (denominator `n - 1`).
fn centered_cov(x: &[Vec<f64>], d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len();
    let mut mean = vec![0.0; d];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let xc: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for r in &xc {
        for i in 0..d {
            if r[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    for c in &mut cov {
        *c /= (n - 1) as f64;
    }
    (xc, cov)
}

fn cov_diff(local: &[Vec<f64>], global: &[Vec<f64>]) -> Result<(usize, Vec<Vec<f64>>, Vec<f64>), FedError> {
    let d = check_batch(local)?;
    let dg = check_batch(global)?;
    if dg != d {
        return Err(FedError::Dimension { expected: d, got: dg });
    }
    let (xc, cl) = centered_cov(local, d);
    let (_, cg) = centered_cov(global, d);
    let diff = cl.iter().zip(&cg).map(|(a, b)| a - b).collect();
    Ok((d, xc, diff))
}

/// `||C_local - C_global||_F^2 / (4 d^2)` over two `batch x d` feature sets.
pub fn coral_loss(local: &[Vec<f64>], global: &[Vec<f64>]) -> Result<f64, FedError> {
    let (d, _, diff) = cov_diff(local, global)?;
    Ok(diff.iter().map(|v| v * v).sum::<f64>() / (4.0 * (d * d) as f64))
}

/// Gradient of [`coral_loss`] with respect to each local feature row:
/// `Xc (C_local - C_global) / (d^2 (n - 1))`.
pub fn coral_grad(local: &[Vec<f64>], global: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FedError> {
    let (d, xc, diff) = cov_diff(local, global)?;
    let scale = 1.0 / ((d * d) as f64 * (local.len() - 1) as f64);
    Ok(xc
        .iter()
        .map(|r| {
            (0..d)
                .map(|j| scale * (0..d).map(|i| r[i] * diff[i * d + j]).sum::<f64>())
                .collect()
        })
        .collect())
}

/// CORAL loss between the local and global actors' pre-softmax outputs on
/// `batch`, and its gradient with respect to the local actor parameters.
pub fn actor_coral(
    actor: &FunctionApproximator,
    global_actor: &FunctionApproximator,
    batch: &[Vec<f64>],
) -> Result<(f64, Vec<f64>), FedError> {
    let local: Vec<Vec<f64>> = batch.iter().map(|o| actor.forward(o)).collect::<Result<_, _>>()?;
    let glob: Vec<Vec<f64>> = batch.iter().map(|o| global_actor.forward(o)).collect::<Result<_, _>>()?;
    let loss = coral_loss(&local, &glob)?;
    let grads = coral_grad(&local, &glob)?;
    let mut total = vec![0.0; actor.n_params()];
    for (o, g) in batch.iter().zip(&grads) {
        for (t, v) in total.iter_mut().zip(actor.vjp(o, g)?) {
            *t += v;
        }
    }
    Ok((loss, total))
}

/// Extra actor ascent direction `-lambda * grad coral`, or `None` when the
/// window is too short or `lambda` is zero.
pub fn coral_direction(learner: &AgentLearner, global: &GlobalModel, lambda: f64) -> Result<Option<Vec<f64>>, FedError> {
    if lambda == 0.0 || learner.recent_obs.len() < 2 {
        return Ok(None);
    }
    let batch: Vec<Vec<f64>> = learner.recent_obs.iter().cloned().collect();
    let (_, grad) = actor_coral(&learner.actor, &global.actor, &batch)?;
    Ok(Some(grad.into_iter().map(|g| -lambda * g).collect()))
}

/// Actor step with the CORAL penalty folded into the ascent direction.
pub fn personalized_actor_update(
    learner: &mut AgentLearner,
    tr: &Transition,
    cfg: &LearnerConfig,
    global: Option<&GlobalModel>,
    lambda: f64,
) -> Result<f64, FedError> {
    let global = global.ok_or(FedError::NoGlobalModel)?;
    let extra = coral_direction(learner, global, lambda)?;
    Ok(learner.actor_update(tr, cfg, extra.as_deref())?)
}
