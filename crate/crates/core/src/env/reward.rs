//! Quality-of-service rewards and their split into per-AP local rewards.
//!
//! Each user's QoS is shared equally among the APs whose effective region
//! covers it, so local rewards sum to the global reward exactly. A user
//! outside every effective region is unserved and contributes nothing.

use serde::{Deserialize, Serialize};

use super::channel::{compute_sinr, FadingDraw, LinkQuality};
use super::handshake::ClusterAssignment;
use super::traffic::UserState;
use super::world::Scenario;
use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Rate of users far from their strongest AP; zero for the rest.
    CellEdgeSumRate,
    /// Data delivered this slot, capped by the user's remaining demand.
    ServedDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub mode: RewardMode,
    /// A user is cell-edge when its strongest AP is farther than this
    /// fraction of the effective radius.
    pub cell_edge_ratio: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { mode: RewardMode::CellEdgeSumRate, cell_edge_ratio: 0.7 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.cell_edge_ratio >= 0.0) {
            return Err(EnvError::Config("cell_edge_ratio must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub global: f64,
    pub per_ap: Vec<f64>,
    pub qos: Vec<f64>,
    pub links: Vec<LinkQuality>,
}

/// QoS of one user given its link and remaining demand.
pub fn qos(scn: &Scenario, link: &LinkQuality, user: &UserState) -> f64 {
    match scn.reward.mode {
        RewardMode::CellEdgeSumRate => {
            if link.strongest_dist > scn.reward.cell_edge_ratio * scn.topo.effective_radius {
                link.rate
            } else {
                0.0
            }
        }
        RewardMode::ServedDemand => (link.rate * scn.traffic.slot_budget).min(user.demand_remaining),
    }
}

pub fn decompose_reward(
    scn: &Scenario,
    users: &[UserState],
    assignment: &ClusterAssignment,
    fading: &FadingDraw,
) -> RewardBreakdown {
    let n_aps = scn.topo.len();
    let mut per_ap = vec![0.0; n_aps];
    let mut global = 0.0;
    let mut qos_all = Vec::with_capacity(users.len());
    let mut links = Vec::with_capacity(users.len());
    let mut covering = Vec::with_capacity(n_aps);
    for (u, user) in users.iter().enumerate() {
        let link = compute_sinr(user.pos, u, assignment, &scn.topo, &scn.channel, fading);
        covering.clear();
        covering.extend((0..n_aps).filter(|&i| scn.region(i).contains(user.pos)));
        let q = if covering.is_empty() { 0.0 } else { qos(scn, &link, user) };
        if q != 0.0 {
            let share = q / covering.len() as f64;
            for &i in &covering {
                per_ap[i] += share;
            }
            global += q;
        }
        qos_all.push(q);
        links.push(link);
    }
    RewardBreakdown { global, per_ap, qos: qos_all, links }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::world::{EnvConfig, Scenario};
    use crate::env::{Point, TopologyConfig};

    fn scenario(cols: usize) -> Scenario {
        let cfg = EnvConfig {
            topology: TopologyConfig { rows: 1, cols, ..Default::default() },
            reward: RewardConfig { mode: RewardMode::ServedDemand, cell_edge_ratio: 0.7 },
            ..Default::default()
        };
        Scenario::new(&cfg).unwrap()
    }

    fn user(x: f64, y: f64) -> UserState {
        UserState { pos: Point::new(x, y), demand_remaining: 100.0, age: 0, parent_cluster: 0 }
    }

    #[test]
    fn single_cover_takes_everything() {
        let scn = scenario(3);
        let users = vec![user(0.0, 3.0)];
        let b = decompose_reward(&scn, &users, &ClusterAssignment::singletons(3), &FadingDraw::Unit);
        assert!(b.global > 0.0);
        assert_eq!(b.per_ap[0], b.global);
        assert_eq!(b.per_ap[1], 0.0);
        assert_eq!(b.per_ap[2], 0.0);
    }

    #[test]
    fn shared_cover_splits_evenly() {
        let scn = scenario(2);
        let mid = Point::new(scn.topo.aps[1].pos.x / 2.0, scn.topo.aps[1].pos.y / 2.0);
        let users = vec![user(mid.x, mid.y)];
        assert!(scn.region(0).contains(mid) && scn.region(1).contains(mid));
        let b = decompose_reward(&scn, &users, &ClusterAssignment::singletons(2), &FadingDraw::Unit);
        assert_eq!(b.per_ap[0], b.global / 2.0);
        assert_eq!(b.per_ap[1], b.global / 2.0);
    }

    #[test]
    fn uncovered_user_contributes_nothing() {
        let scn = scenario(1);
        let users = vec![user(500.0, 500.0)];
        let b = decompose_reward(&scn, &users, &ClusterAssignment::singletons(1), &FadingDraw::Unit);
        assert_eq!(b.global, 0.0);
        assert_eq!(b.per_ap, vec![0.0]);
    }
}
