//! The training loop: observe, act, step the environment, update every
//! agent, then federate on schedule.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::{save_checkpoint, Checkpoint};
use super::{derive_seed, ExperimentConfig, HarnessError, PolicyKind, RunMode};
use crate::env::topology::HEX_DIRECTIONS;
use crate::env::{observe, step, JointAction, NetworkTopology, Scenario, World};
use crate::federation::{coral_direction, sync, FederationMode, GlobalModel, SyncEvent};
use crate::learn::{features, sample_action, AgentLearner, CriticInput, Transition, FEATURE_DIM};

/// One metrics line, aggregated over the `eval_every` steps ending at `step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub step: u64,
    pub mean_global_reward: f64,
    pub ap_reward_min: f64,
    pub ap_reward_mean: f64,
    pub ap_reward_max: f64,
    /// Mean number of clusters of each size `1..=max_cluster_size`.
    pub cluster_sizes: Vec<f64>,
    pub fed_sync: bool,
    pub r_hat_mean: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricsRow>,
    pub events: Vec<SyncEvent>,
    pub agents: Vec<AgentLearner>,
    /// Global reward of every executed step.
    pub global_rewards: Vec<f64>,
    pub stopped_early: bool,
}

impl RunResult {
    pub fn steps_run(&self) -> u64 {
        self.global_rewards.len() as u64
    }

    /// Mean global reward over the last `frac` of executed steps.
    pub fn tail_mean(&self, frac: f64) -> f64 {
        let n = self.global_rewards.len();
        if n == 0 {
            return 0.0;
        }
        let k = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        self.global_rewards[n - k..].iter().sum::<f64>() / k as f64
    }

    pub fn metrics_csv(&self) -> String {
        let cap = self.config.topology.max_cluster_size;
        let mut s = String::from("step,mean_global_reward,ap_reward_min,ap_reward_mean,ap_reward_max");
        for k in 1..=cap {
            let _ = write!(s, ",clusters_size{k}");
        }
        s.push_str(",fed_sync,r_hat_mean\n");
        for r in &self.metrics {
            let _ = write!(
                s,
                "{},{},{},{},{}",
                r.step, r.mean_global_reward, r.ap_reward_min, r.ap_reward_mean, r.ap_reward_max
            );
            for c in &r.cluster_sizes {
                let _ = write!(s, ",{c}");
            }
            let _ = writeln!(s, ",{},{}", u8::from(r.fed_sync), r.r_hat_mean);
        }
        s
    }

    pub fn events_csv(&self) -> String {
        let mut s = String::from("step,mode,norm_before,norm_after\n");
        for e in &self.events {
            let _ = writeln!(s, "{},{},{},{}", e.step, e.mode.as_str(), e.norm_before, e.norm_after);
        }
        s
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_agents(self.config.hash(), &self.agents)
    }
}

/// For each hex direction of `ap`: 1 when the neighbor there requested `ap`.
pub fn neighbor_offers(topo: &NetworkTopology, joint: &JointAction, ap: usize) -> Vec<f64> {
    (0..HEX_DIRECTIONS)
        .map(|d| match topo.neighbor_in_direction(ap, d) {
            Some(j) if joint.requests(j).contains(&ap) => 1.0,
            _ => 0.0,
        })
        .collect()
}

fn observe_features(scn: &Scenario, world: &World) -> Vec<Vec<f64>> {
    (0..scn.n_aps())
        .map(|ap| features(&observe(scn, &world.users, ap, &scn.observation)))
        .collect()
}

struct Window {
    global: f64,
    per_ap: Vec<f64>,
    sizes: Vec<f64>,
    synced: bool,
    steps: u64,
}

impl Window {
    fn new(n_aps: usize, cap: usize) -> Self {
        Self { global: 0.0, per_ap: vec![0.0; n_aps], sizes: vec![0.0; cap], synced: false, steps: 0 }
    }

    fn row(&self, step: u64, agents: &[AgentLearner]) -> MetricsRow {
        let k = self.steps.max(1) as f64;
        let ap: Vec<f64> = self.per_ap.iter().map(|v| v / k).collect();
        let n = ap.len().max(1) as f64;
        MetricsRow {
            step,
            mean_global_reward: self.global / k,
            ap_reward_min: ap.iter().cloned().fold(f64::INFINITY, f64::min).min(f64::MAX),
            ap_reward_mean: ap.iter().sum::<f64>() / n,
            ap_reward_max: ap.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(f64::MIN),
            cluster_sizes: self.sizes.iter().map(|v| v / k).collect(),
            fed_sync: self.synced,
            r_hat_mean: agents.iter().map(|a| a.r_hat).sum::<f64>() / agents.len().max(1) as f64,
        }
    }
}

/// Tracks whether the running mean reward has stopped improving.
struct Plateau {
    window: usize,
    patience: u64,
    recent: std::collections::VecDeque<f64>,
    sum: f64,
    best: f64,
    best_at: u64,
}

impl Plateau {
    fn push(&mut self, t: u64, r: f64) -> bool {
        if self.patience == 0 {
            return false;
        }
        self.recent.push_back(r);
        self.sum += r;
        if self.recent.len() > self.window {
            self.sum -= self.recent.pop_front().unwrap_or(0.0);
        }
        if self.recent.len() < self.window {
            return false;
        }
        let mean = self.sum / self.window as f64;
        if mean > self.best {
            self.best = mean;
            self.best_at = t;
        }
        t - self.best_at >= self.patience
    }
}

/// Runs the configured experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let scn = Scenario::new(&cfg.env())?;
    let topo = &scn.topo;
    let n = scn.n_aps();
    let n_slots = topo.slot_count();
    let masks: Vec<Vec<bool>> = (0..n).map(|i| topo.slot_mask(i)).collect();
    let env_seed = derive_seed(cfg.seed, 0);
    let mut world = World::new(&scn, env_seed);
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64 + 1)))
        .collect();
    let mut agents: Vec<AgentLearner> = rngs
        .iter_mut()
        .map(|rng| AgentLearner::new(&cfg.learner, FEATURE_DIM, n_slots, HEX_DIRECTIONS, rng))
        .collect();

    let learned = cfg.policy == PolicyKind::Learned;
    let fed = &cfg.federation;
    let coral = learned && fed.mode == FederationMode::CoralPersonalized;
    let with_offers = cfg.learner.critic_input == CriticInput::WithNeighborActions;
    let cap = topo.max_cluster_size;

    let choose = |agents: &[AgentLearner], rngs: &mut [ChaCha8Rng], obs: &[Vec<f64>]| -> Result<Vec<usize>, HarnessError> {
        (0..n)
            .map(|i| {
                if learned {
                    let probs = agents[i]
                        .policy(&obs[i], &masks[i])
                        .map_err(|source| HarnessError::Numerical { step: 0, source })?;
                    Ok(sample_action(&mut rngs[i], &probs))
                } else {
                    let k = rngs[i].gen_range(0..topo.actions(i).len());
                    Ok(topo.action_slots(i)[k])
                }
            })
            .collect()
    };

    let mut obs = observe_features(&scn, &world);
    let mut act = choose(&agents, &mut rngs, &obs)?;
    let mut global: Option<GlobalModel> = None;
    let mut metrics = Vec::new();
    let mut events = Vec::new();
    let mut rewards = Vec::with_capacity(cfg.total_steps as usize);
    let mut window = Window::new(n, cap);
    let mut plateau = Plateau {
        window: cfg.plateau_mean_window as usize,
        patience: cfg.plateau_patience,
        recent: Default::default(),
        sum: 0.0,
        best: f64::NEG_INFINITY,
        best_at: 0,
    };
    let mut stopped_early = false;

    for t in 1..=cfg.total_steps {
        let local: Vec<usize> = (0..n)
            .map(|i| topo.action_for_slot(i, act[i]).expect("sampled slots are admissible"))
            .collect();
        let joint = JointAction::from_indices(topo, &local)?;
        let out = step(&scn, &mut world, &joint);

        let terminal = cfg.mode == RunMode::Episodic && t % cfg.episode_horizon == 0;
        if terminal {
            world = World::new(&scn, derive_seed(env_seed, t / cfg.episode_horizon));
        }
        let next_obs = observe_features(&scn, &world);
        let next_act = choose(&agents, &mut rngs, &next_obs).map_err(|e| match e {
            HarnessError::Numerical { source, .. } => HarnessError::Numerical { step: t, source },
            other => other,
        })?;

        if learned {
            for i in 0..n {
                let tr = Transition {
                    obs: std::mem::take(&mut obs[i]),
                    mask: masks[i].clone(),
                    action: act[i],
                    reward: out.per_ap[i],
                    next_obs: next_obs[i].clone(),
                    next_action: next_act[i],
                    neighbor_actions: with_offers.then(|| neighbor_offers(topo, &joint, i)),
                    terminal,
                };
                let extra = match (&global, coral) {
                    (Some(g), true) => coral_direction(&agents[i], g, fed.coral_weight)?,
                    _ => None,
                };
                agents[i]
                    .update(&tr, &cfg.learner, extra.as_deref())
                    .map_err(|source| HarnessError::Numerical { step: t, source })?;
                if coral {
                    agents[i].record_observation(&tr.obs, fed.coral_window);
                }
            }
            if let Some(ev) = sync(&mut agents, fed, t, &mut global)? {
                window.synced = true;
                events.push(ev);
            }
        }

        rewards.push(out.global);
        window.global += out.global;
        for (acc, r) in window.per_ap.iter_mut().zip(&out.per_ap) {
            *acc += r;
        }
        for c in out.assignment.clusters() {
            window.sizes[c.len().min(cap) - 1] += 1.0;
        }
        window.steps += 1;
        if t % cfg.eval_every == 0 {
            metrics.push(window.row(t, &agents));
            window = Window::new(n, cap);
        }

        obs = next_obs;
        act = next_act;
        if plateau.push(t, out.global) {
            stopped_early = true;
            break;
        }
    }

    Ok(RunResult { config: cfg.clone(), metrics, events, agents, global_rewards: rewards, stopped_early })
}

#[derive(Serialize)]
struct Summary {
    steps_run: u64,
    stopped_early: bool,
    final_tenth_mean_reward: f64,
    sync_events: usize,
    config_hash: String,
}

/// Writes `config.json`, `metrics.csv`, `events.csv`, `summary.json` and
/// `checkpoint.bin` into `dir`.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.json"), result.config.to_json())?;
    std::fs::write(dir.join("metrics.csv"), result.metrics_csv())?;
    std::fs::write(dir.join("events.csv"), result.events_csv())?;
    let summary = Summary {
        steps_run: result.steps_run(),
        stopped_early: result.stopped_early,
        final_tenth_mean_reward: result.tail_mean(0.1),
        sync_events: result.events.len(),
        config_hash: result.config.hash(),
    };
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    save_checkpoint(&dir.join("checkpoint.bin"), &result.checkpoint())?;
    Ok(())
}
