//! CoMP wireless environment: hex AP grid, clustered users, path-loss SINR,
//! handshake cooperation and geometrically decomposed rewards.

pub mod channel;
pub mod handshake;
pub mod observe;
pub mod reward;
pub mod topology;
pub mod traffic;
pub mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channel::{compute_sinr, effective_region, ChannelConfig, EffectiveRegion, Fading, FadingDraw, LinkQuality};
pub use handshake::{is_reachable, joint_action_for, resolve_handshake, ClusterAssignment, JointAction};
pub use observe::{observe, Observation, ObservationConfig};
pub use reward::{decompose_reward, RewardBreakdown, RewardConfig, RewardMode};
pub use topology::{build_topology, enumerate_actions, NetworkTopology, PairRestriction, TopologyConfig};
pub use traffic::{sample_users, TrafficConfig, UserState};
pub use world::{evaluate, observe_all, step, EnvConfig, Scenario, StepOutcome, World};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    #[inline]
    pub fn dist_sq(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn centered(center: Point, width: f64, height: f64) -> Self {
        Self {
            min: Point::new(center.x - width / 2.0, center.y - height / 2.0),
            max: Point::new(center.x + width / 2.0, center.y + height / 2.0),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }
}
