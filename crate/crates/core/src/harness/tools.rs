//! Offline utilities behind the CLI: baseline evaluation, gradient audits
//! and federation-period sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, run_experiment, ExperimentConfig, HarnessError};
use crate::baselines::{exhaustive_oracle, fixed_scheme, greedy_clustering, random_policy, BaselineKind};
use crate::env::{evaluate, resolve_handshake, Scenario, World};
use crate::info::{linspace, sweep, InfoParams, SweepRow};
use crate::learn::{grad_check, ApproxSpec, FunctionApproximator, FEATURE_DIM, GRAD_CHECK_STEP};

/// Mean and sample standard deviation of the global reward of one baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSummary {
    pub kind: BaselineKind,
    pub worlds: usize,
    pub mean: f64,
    pub std: f64,
}

impl BaselineSummary {
    pub const HEADER: &'static str = "kind,worlds,mean_reward,std_reward";

    pub fn to_csv(&self) -> String {
        let kind = match self.kind {
            BaselineKind::Fixed => "fixed",
            BaselineKind::Greedy => "greedy",
            BaselineKind::Random => "random",
            BaselineKind::Exhaustive => "exhaustive",
        };
        format!("{kind},{},{},{}", self.worlds, self.mean, self.std)
    }
}

/// Global reward of `kind` on `worlds` independently sampled user layouts.
pub fn evaluate_baseline(cfg: &ExperimentConfig, kind: BaselineKind, worlds: usize) -> Result<BaselineSummary, HarnessError> {
    cfg.validate()?;
    let scn = Scenario::new(&cfg.env())?;
    let env_seed = derive_seed(cfg.seed, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut rewards = Vec::with_capacity(worlds);
    for w in 0..worlds {
        let world = World::new(&scn, derive_seed(env_seed, w as u64));
        let r = match kind {
            BaselineKind::Fixed => evaluate(&scn, &world.users, &fixed_scheme(&scn.topo)).global,
            BaselineKind::Greedy => evaluate(&scn, &world.users, &greedy_clustering(&scn, &world.users)).global,
            BaselineKind::Random => {
                let asg = resolve_handshake(&random_policy(&mut rng, &scn.topo), &scn.topo);
                evaluate(&scn, &world.users, &asg).global
            }
            BaselineKind::Exhaustive => {
                exhaustive_oracle(&scn, &world.users).map_err(|e| HarnessError::Runtime(e.to_string()))?.1
            }
        };
        rewards.push(r);
    }
    let n = rewards.len().max(1) as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = if rewards.len() > 1 {
        rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(BaselineSummary { kind, worlds, mean, std: var.sqrt() })
}

/// Worst gradient-check errors over random inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradAudit {
    pub points: usize,
    pub linear_max: f64,
    pub mlp_max: f64,
}

/// Hidden widths of the audited rectifier network.
pub const AUDIT_HIDDEN: [usize; 2] = [16, 16];

/// Checks analytic against central-difference gradients for a linear map and
/// a rectifier MLP at `points` random inputs. Inputs whose pre-activations
/// sit within a few finite-difference steps of a kink are redrawn, since the
/// rectifier is not differentiable there.
pub fn gradient_audit(seed: u64, points: usize, n_out: usize) -> Result<GradAudit, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mlp_spec = ApproxSpec::Mlp { hidden: AUDIT_HIDDEN.to_vec() };
    let num = |e: crate::learn::LearnError| HarnessError::Numerical { step: 0, source: e };
    let mut audit = GradAudit { points, linear_max: 0.0, mlp_max: 0.0 };
    for _ in 0..points {
        let mut lin = FunctionApproximator::zeros(&ApproxSpec::Linear, FEATURE_DIM, n_out);
        // small weights, as near the zero start of training; the rounding
        // error of the central difference grows with the output magnitude
        for p in lin.params_mut() {
            *p = rng.gen_range(-0.1..0.1);
        }
        let mut mlp = FunctionApproximator::init(&mlp_spec, FEATURE_DIM, n_out, &mut rng);
        // nonzero biases so every layer's bias gradient is exercised
        let random: Vec<f64> = mlp.params().iter().map(|&w| w + rng.gen_range(-0.1..0.1)).collect();
        mlp.set_params(&random).map_err(num)?;
        let x = loop {
            let x: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if mlp.min_abs_preactivation(&x).is_none_or(|m| m > 10.0 * GRAD_CHECK_STEP) {
                break x;
            }
        };
        audit.linear_max = audit.linear_max.max(grad_check(&lin, &x).map_err(num)?);
        audit.mlp_max = audit.mlp_max.max(grad_check(&mlp, &x).map_err(num)?);
    }
    Ok(audit)
}

/// Final-10% mean reward of one run per federation period.
#[derive(Debug, Clone, PartialEq)]
pub struct FedSweepRow {
    pub period_f: u64,
    pub final_reward: f64,
    pub sync_events: usize,
}

pub const FED_SWEEP_HEADER: &str = "F,final_reward,sync_events";

/// Reruns `cfg` once per period in `f_values`; runs execute in parallel
/// threads and rows keep the order of `f_values`.
pub fn sweep_fed(cfg: &ExperimentConfig, f_values: &[u64]) -> Result<Vec<FedSweepRow>, HarnessError> {
    let results: Vec<Result<FedSweepRow, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = f_values
            .iter()
            .map(|&f| {
                let mut c = cfg.clone();
                c.federation.period_f = f;
                s.spawn(move || {
                    let r = run_experiment(&c)?;
                    Ok(FedSweepRow { period_f: f, final_reward: r.tail_mean(0.1), sync_events: r.events.len() })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    results.into_iter().collect()
}

/// Largest relative spread `(max - min) / max` of final rewards.
pub fn relative_spread(rows: &[FedSweepRow]) -> f64 {
    let hi = rows.iter().map(|r| r.final_reward).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.final_reward).fold(f64::INFINITY, f64::min);
    if rows.is_empty() || hi <= 0.0 {
        0.0
    } else {
        (hi - lo) / hi
    }
}

/// Parameter file of the `bound` subcommand: model parameters plus the
/// `(k_star, F)` grid to tabulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundRequest {
    pub params: InfoParams,
    pub k_star: Vec<f64>,
    pub f_values: Vec<u32>,
}

impl Default for BoundRequest {
    /// The convergence-rate figure: twenty `k_star` values over
    /// `[0.001, 0.02]` and `F` in `{1, 10, 100}`.
    fn default() -> Self {
        Self { params: InfoParams::default(), k_star: linspace(0.001, 0.02, 20), f_values: vec![1, 10, 100] }
    }
}

impl BoundRequest {
    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let req: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        req.params.validate()?;
        Ok(req)
    }

    pub fn rows(&self) -> Result<Vec<SweepRow>, HarnessError> {
        Ok(sweep(&self.params, &self.k_star, &self.f_values)?)
    }
}
