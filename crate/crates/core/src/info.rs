//! Informational convergence model for federated multi-agent learning.
//!
//! Each agent holds local information `I_env` (ceiling `C_env`) and, per
//! neighbor, coordinating information `I_*` (ceiling `C_*`). Gains are
//! `K * Lambda(C - I)`; neighbors' learning erodes coordinating information
//! except at federated steps, where the whole round's net progress of all
//! agents is pooled. Agents are homogeneous, so one agent's trajectory
//! stands for all of them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("bound undefined: {0}")]
    Invalid(String),
}

/// Learned-information map `Lambda`; only the identity is built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaFn {
    #[default]
    Identity,
}

impl LambdaFn {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            LambdaFn::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfoParams {
    pub n_agents: u32,
    pub n_neighbors: u32,
    pub k_env: f64,
    pub k_star: f64,
    pub c_env: f64,
    pub c_star: f64,
    pub i_env0: f64,
    pub i_star0: f64,
    pub period_f: u32,
    pub epsilon: f64,
    pub lambda_fn: LambdaFn,
    /// Model the erosion of coordinating information by neighbors' learning.
    pub loss_enabled: bool,
}

impl Default for InfoParams {
    /// The parameter set of the convergence-rate figure: `C = 0.1`,
    /// ten agents, `I(0) = 0.01`, `epsilon = 0.001`.
    fn default() -> Self {
        Self {
            n_agents: 10,
            n_neighbors: 9,
            k_env: 0.05,
            k_star: 0.01,
            c_env: 0.1,
            c_star: 0.1,
            i_env0: 0.01,
            i_star0: 0.01,
            period_f: 10,
            epsilon: 0.001,
            lambda_fn: LambdaFn::Identity,
            loss_enabled: true,
        }
    }
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl InfoParams {
    pub fn validate(&self) -> Result<(), InfoError> {
        let bad = |m: String| Err(InfoError::Params(m));
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1".into());
        }
        if self.period_f == 0 {
            return bad("period_f must be at least 1".into());
        }
        for (name, k) in [("k_env", self.k_env), ("k_star", self.k_star)] {
            if !(0.0..=1.0).contains(&k) {
                return bad(format!("{name} = {k} outside [0, 1]"));
            }
        }
        if !(self.c_env > 0.0 && self.c_star > 0.0) {
            return bad("information ceilings must be positive".into());
        }
        let total = self.c_env + self.n_neighbors as f64 * self.c_star;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return bad(format!("c_env + n_neighbors * c_star = {total}, expected 1"));
        }
        if !(0.0..=self.c_env).contains(&self.i_env0) || !(0.0..=self.c_star).contains(&self.i_star0) {
            return bad("initial information must lie in [0, ceiling]".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon = {} outside (0, 1)", self.epsilon));
        }
        let n = self.n_agents as f64;
        if n * self.k_star >= 1.0 || n * self.k_env >= 1.0 {
            return bad("n_agents * K must stay below 1".into());
        }
        Ok(())
    }

    /// The period is meant to be small next to `(C_* - I_*(0)) / K_*`.
    pub fn period_warning(&self) -> Option<String> {
        if self.k_star <= 0.0 {
            return None;
        }
        let scale = (self.c_star - self.i_star0) / self.k_star;
        (self.period_f as f64 >= scale).then(|| format!("F = {} is not small next to {scale:.3}", self.period_f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct InfoStep {
    pub t: u64,
    pub i_env: f64,
    pub i_star: f64,
    pub gain_env: f64,
    pub gain_star: f64,
    pub loss_star: f64,
    pub federated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InfoTrajectory {
    /// Entry `t` holds the state after step `t`; entry 0 is the initial state.
    pub steps: Vec<InfoStep>,
}

impl InfoTrajectory {
    pub fn i_env(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.i_env).collect()
    }

    pub fn i_star(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.i_star).collect()
    }

    /// First step at which `I_*` reaches `(1 - epsilon) C_*`.
    pub fn first_star_crossing(&self, p: &InfoParams) -> Option<u64> {
        let target = (1.0 - p.epsilon) * p.c_star;
        self.steps.iter().find(|s| s.i_star >= target).map(|s| s.t)
    }

    pub fn first_env_crossing(&self, p: &InfoParams) -> Option<u64> {
        let target = (1.0 - p.epsilon) * p.c_env;
        self.steps.iter().find(|s| s.i_env >= target).map(|s| s.t)
    }
}

/// Iterate the homogeneous information recursions for `horizon` steps.
///
/// Local steps add the agent's own net gain. At a step divisible by `F` the
/// loss is switched off and the state becomes the value at the previous
/// federated step plus `n_agents` times the round's summed net gains.
pub fn simulate_info(p: &InfoParams, horizon: u64) -> Result<InfoTrajectory, InfoError> {
    p.validate()?;
    let nb = p.n_neighbors as f64;
    let n = p.n_agents as f64;
    let f = p.period_f as u64;
    let (mut i_env, mut i_star) = (p.i_env0, p.i_star0);
    let (mut base_env, mut base_star) = (i_env, i_star);
    let (mut round_env, mut round_star) = (0.0, 0.0);
    let mut steps = Vec::with_capacity(horizon as usize + 1);
    steps.push(InfoStep { i_env, i_star, ..Default::default() });

    for t in 1..=horizon {
        let federated = t % f == 0;
        let gain_env = p.k_env * p.lambda_fn.apply(p.c_env - i_env);
        let gain_star = p.k_star * p.lambda_fn.apply(p.c_star - i_star);
        let loss_star = if p.loss_enabled && !federated {
            // neighbors' fresh coordinating information relative to what they hold
            let fresh = nb * gain_star;
            let held = i_env + nb * i_star;
            if held + fresh > 0.0 {
                fresh / (held + fresh) * i_star
            } else {
                0.0
            }
        } else {
            0.0
        };
        round_env += gain_env;
        round_star += gain_star - loss_star;
        if federated {
            i_env = (base_env + n * round_env).clamp(0.0, p.c_env);
            i_star = (base_star + n * round_star).clamp(0.0, p.c_star);
            base_env = i_env;
            base_star = i_star;
            round_env = 0.0;
            round_star = 0.0;
        } else {
            i_env = (i_env + gain_env).clamp(0.0, p.c_env);
            i_star = (i_star + gain_star - loss_star).clamp(0.0, p.c_star);
        }
        steps.push(InfoStep { t, i_env, i_star, gain_env, gain_star, loss_star, federated });
    }
    Ok(InfoTrajectory { steps })
}

/// `alpha = K_* (1 - I_*(0) / (C_env / n_neighbors + K_* C_* + C_*))`.
pub fn alpha(p: &InfoParams) -> f64 {
    let nb = (p.n_neighbors as f64).max(1.0);
    p.k_star * (1.0 - p.i_star0 / (p.c_env / nb + p.k_star * p.c_star + p.c_star))
}

/// Per-round contraction `|B| [(1 - K_*)(1 - (1 - alpha)^(F-1)) + K_*]`.
pub fn bracket(p: &InfoParams) -> f64 {
    let a = alpha(p);
    let f = p.period_f as i32;
    p.n_agents as f64 * ((1.0 - p.k_star) * (1.0 - (1.0 - a).powi(f - 1)) + p.k_star)
}

fn valid_bracket(p: &InfoParams) -> Result<f64, InfoError> {
    let b = bracket(p);
    if b > 0.0 && b < 1.0 {
        Ok(b)
    } else {
        Err(InfoError::Invalid(format!("round contraction {b:.6} outside (0, 1)")))
    }
}

/// Closed-form bound on `I_*(t)` taken at federated instants:
/// `C_* - (1 - bracket)^floor(t / F) (C_* - I_*(0))`.
pub fn closed_form_i(p: &InfoParams, t: u64) -> Result<f64, InfoError> {
    p.validate()?;
    let rounds = t / p.period_f as u64;
    if rounds == 0 {
        return Ok(p.i_star0);
    }
    let b = valid_bracket(p)?;
    Ok(p.c_star - (1.0 - b).powf(rounds as f64) * (p.c_star - p.i_star0))
}

/// Neighbor-part bound `t* = F log(C_* eps / (C_* - I_*(0))) / log(1 - bracket)`,
/// real-valued; zero when the initial information already meets the target.
pub fn bound_t_star(p: &InfoParams) -> Result<f64, InfoError> {
    p.validate()?;
    let ratio = p.c_star * p.epsilon / (p.c_star - p.i_star0);
    if !(ratio < 1.0) {
        return Ok(0.0);
    }
    let b = valid_bracket(p)?;
    Ok((p.period_f as f64 * ratio.ln() / (1.0 - b).ln()).max(0.0))
}

/// `t*` rounded up to a whole number of federated rounds.
pub fn bound_t_star_rounds(p: &InfoParams) -> Result<f64, InfoError> {
    let f = p.period_f as f64;
    Ok((bound_t_star(p)? / f).ceil() * f)
}

/// Environment-part bound `log_{1 - |B| K_env}(C_env eps / (C_env - I_env(0)))`.
pub fn bound_t_env(p: &InfoParams) -> Result<f64, InfoError> {
    p.validate()?;
    let ratio = p.c_env * p.epsilon / (p.c_env - p.i_env0);
    if !(ratio < 1.0) {
        return Ok(0.0);
    }
    let base = 1.0 - p.n_agents as f64 * p.k_env;
    if !(base > 0.0 && base < 1.0) {
        return Err(InfoError::Invalid(format!("log base {base} outside (0, 1)")));
    }
    Ok((ratio.ln() / base.ln()).max(0.0))
}

pub fn convergence_bound(p: &InfoParams) -> Result<f64, InfoError> {
    Ok(bound_t_star(p)?.max(bound_t_env(p)?))
}

/// Validity marker of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Valid,
    /// Computed, but `F` is not small next to `(C_* - I_*(0)) / K_*`.
    Warn,
    Invalid,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Valid => "true",
            RowStatus::Warn => "warn",
            RowStatus::Invalid => "false",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k_star: f64,
    pub period_f: u32,
    pub t_star: Option<f64>,
    pub t_env: Option<f64>,
    pub bound: Option<f64>,
    pub status: RowStatus,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str = "k_star,F,t_star,t_env,bound,valid";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| format!("{x}"));
        format!(
            "{},{},{},{},{},{}",
            self.k_star,
            self.period_f,
            num(self.t_star),
            num(self.t_env),
            num(self.bound),
            self.status.as_str()
        )
    }
}

/// One row per `(k_star, F)` pair, `k_star` outermost. Invalid points are
/// recorded in their row rather than aborting the sweep.
pub fn sweep(base: &InfoParams, k_star_grid: &[f64], f_grid: &[u32]) -> Result<Vec<SweepRow>, InfoError> {
    if k_star_grid.is_empty() || f_grid.is_empty() {
        return Err(InfoError::Params("sweep grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(k_star_grid.len() * f_grid.len());
    for &k in k_star_grid {
        for &f in f_grid {
            let p = InfoParams { k_star: k, period_f: f, ..base.clone() };
            let t_star = bound_t_star(&p);
            let t_env = bound_t_env(&p);
            let (status, error) = match (&t_star, &t_env) {
                (Ok(_), Ok(_)) if p.period_warning().is_some() => (RowStatus::Warn, p.period_warning()),
                (Ok(_), Ok(_)) => (RowStatus::Valid, None),
                (Err(e), _) | (_, Err(e)) => (RowStatus::Invalid, Some(e.to_string())),
            };
            let (ts, te) = (t_star.ok(), t_env.ok());
            let bound = match (ts, te) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            rows.push(SweepRow { k_star: k, period_f: f, t_star: ts, t_env: te, bound, status, error });
        }
    }
    Ok(rows)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
