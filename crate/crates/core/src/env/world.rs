//! Scenario (static network description) and the stepping environment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::{effective_region, ChannelConfig, EffectiveRegion, FadingDraw};
use super::handshake::{resolve_handshake, ClusterAssignment, JointAction};
use super::observe::{observe, Observation, ObservationConfig};
use super::reward::{decompose_reward, RewardBreakdown, RewardConfig};
use super::topology::{build_topology, NetworkTopology, TopologyConfig};
use super::traffic::{sample_users, TrafficConfig, UserState};
use super::{EnvError, Point, Rect};

/// Environment sections of the experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub topology: TopologyConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub reward: RewardConfig,
    pub observation: ObservationConfig,
}

/// Everything about the network that does not change while stepping.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topo: NetworkTopology,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub reward: RewardConfig,
    pub observation: ObservationConfig,
    pub area: Rect,
    regions: Vec<EffectiveRegion>,
}

impl Scenario {
    pub fn new(cfg: &EnvConfig) -> Result<Self, EnvError> {
        let topo = build_topology(&cfg.topology, &cfg.channel)?;
        let (lo, hi) = topo.bounds();
        let center = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
        let area = Rect::centered(center, cfg.traffic.area_width, cfg.traffic.area_height);
        Self::with_area(topo, cfg, area)
    }

    /// Builds a scenario around an existing topology (for example a patch
    /// cut with [`NetworkTopology::subgraph`]).
    pub fn with_area(topo: NetworkTopology, cfg: &EnvConfig, area: Rect) -> Result<Self, EnvError> {
        cfg.channel.validate()?;
        cfg.traffic.validate()?;
        cfg.reward.validate()?;
        let regions = (0..topo.len())
            .map(|i| effective_region(&topo, &cfg.channel, cfg.topology.effective_threshold, i))
            .collect();
        Ok(Self {
            topo,
            channel: cfg.channel.clone(),
            traffic: cfg.traffic.clone(),
            reward: cfg.reward.clone(),
            observation: cfg.observation.clone(),
            area,
            regions,
        })
    }

    pub fn region(&self, ap: usize) -> &EffectiveRegion {
        &self.regions[ap]
    }

    pub fn n_aps(&self) -> usize {
        self.topo.len()
    }

    pub fn sample_users(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<UserState> {
        let t = &self.traffic;
        // validated at construction: n_clusters >= 1 whenever users are drawn
        sample_users(rng, self.area, n, t.n_clusters.max(1), t.cluster_radius, t.demand)
            .expect("traffic config validated")
    }
}

/// Mutable simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub t: u64,
    pub users: Vec<UserState>,
    pub assignment: ClusterAssignment,
    pub rng: ChaCha8Rng,
}

impl World {
    /// Fresh world: a full user population whose ages alternate between
    /// 0 and `lifetime - 1` so that expiries are spread over slots.
    pub fn new(scn: &Scenario, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut users = scn.sample_users(&mut rng, scn.traffic.n_users);
        let lifetime = scn.traffic.lifetime;
        for (k, u) in users.iter_mut().enumerate() {
            u.age = (k as u32) % lifetime;
        }
        Self { t: 0, users, assignment: ClusterAssignment::singletons(scn.n_aps()), rng }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub per_ap: Vec<f64>,
    pub global: f64,
    pub assignment: ClusterAssignment,
    pub breakdown: RewardBreakdown,
}

/// Advances the world by one slot under `joint`.
///
/// Handshake → SINR and rewards → demand decrement → ageing and expiry →
/// replacement users → `t + 1`. The world is never reset here.
pub fn step(scn: &Scenario, world: &mut World, joint: &JointAction) -> StepOutcome {
    let assignment = resolve_handshake(joint, &scn.topo);
    let fading = FadingDraw::draw(scn.channel.fading, &mut world.rng, world.users.len(), scn.n_aps());
    let breakdown = decompose_reward(scn, &world.users, &assignment, &fading);

    let budget = scn.traffic.slot_budget;
    for (u, link) in world.users.iter_mut().zip(&breakdown.links) {
        u.demand_remaining = (u.demand_remaining - link.rate * budget).max(0.0);
        u.age += 1;
    }
    let lifetime = scn.traffic.lifetime;
    world.users.retain(|u| u.age < lifetime && u.demand_remaining > 0.0);
    let missing = scn.traffic.n_users.saturating_sub(world.users.len());
    if missing > 0 {
        let fresh = scn.sample_users(&mut world.rng, missing);
        world.users.extend(fresh);
    }
    world.t += 1;
    world.assignment = assignment.clone();

    StepOutcome {
        per_ap: breakdown.per_ap.clone(),
        global: breakdown.global,
        assignment,
        breakdown,
    }
}

/// Rewards of `assignment` on the current users without advancing the world.
pub fn evaluate(scn: &Scenario, users: &[UserState], assignment: &ClusterAssignment) -> RewardBreakdown {
    decompose_reward(scn, users, assignment, &FadingDraw::Unit)
}

pub fn observe_all(scn: &Scenario, world: &World) -> Vec<Observation> {
    (0..scn.n_aps())
        .map(|ap| observe(scn, &world.users, ap, &scn.observation))
        .collect()
}
