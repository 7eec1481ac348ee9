//! Path-loss channel, SINR under joint transmission, and effective regions.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::handshake::ClusterAssignment;
use super::topology::NetworkTopology;
use super::{EnvError, Point};

/// Distances below this are clamped to avoid the path-loss singularity.
pub const MIN_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// beta = 1 for every link.
    Unit,
    /// Exponential(1) power gains redrawn every slot.
    Rayleigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub tx_power: f64,
    pub pathloss_exponent: f64,
    pub noise_power: f64,
    pub fading: Fading,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tx_power: 1.0,
            pathloss_exponent: 4.0,
            noise_power: 1e-9,
            fading: Fading::Unit,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.tx_power > 0.0) {
            return Err(EnvError::Config("tx_power must be positive".into()));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(EnvError::Config("pathloss_exponent must be >= 2".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(EnvError::Config("noise_power must be positive".into()));
        }
        Ok(())
    }

    /// Large-scale received power `P * d^-alpha` with the distance clamp.
    pub fn path_gain(&self, d: f64) -> f64 {
        let d = d.max(MIN_DISTANCE);
        let a = self.pathloss_exponent;
        if a.fract() == 0.0 && a.abs() <= 16.0 {
            // integer exponents take the much cheaper powi
            self.tx_power * d.powi(-(a as i32))
        } else {
            self.tx_power * d.powf(-a)
        }
    }
}

/// Small-scale fading gains for one slot, laid out user-major
/// (`gain(u, ap) = values[u * n_aps + ap]`).
#[derive(Debug, Clone, PartialEq)]
pub enum FadingDraw {
    Unit,
    Table { n_aps: usize, values: Vec<f64> },
}

impl FadingDraw {
    pub fn draw<R: Rng + ?Sized>(kind: Fading, rng: &mut R, n_users: usize, n_aps: usize) -> Self {
        match kind {
            Fading::Unit => FadingDraw::Unit,
            Fading::Rayleigh => FadingDraw::Table {
                n_aps,
                values: (0..n_users * n_aps).map(|_| rng.sample::<f64, _>(Exp1)).collect(),
            },
        }
    }

    #[inline]
    pub fn gain(&self, user: usize, ap: usize) -> f64 {
        match self {
            FadingDraw::Unit => 1.0,
            FadingDraw::Table { n_aps, values } => values[user * n_aps + ap],
        }
    }
}

/// Per-user link evaluation under a cluster assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    pub sinr: f64,
    /// Shannon rate `log2(1 + SINR)` in bit/s/Hz.
    pub rate: f64,
    /// AP with the strongest received power at the user.
    pub strongest_ap: usize,
    pub strongest_dist: f64,
}

/// SINR of a user at `pos` (index `user` into the fading table).
///
/// The serving cluster is the cluster of the strongest AP; every AP in it
/// contributes signal, every other AP interference.
pub fn compute_sinr(
    pos: Point,
    user: usize,
    assignment: &ClusterAssignment,
    topo: &NetworkTopology,
    ch: &ChannelConfig,
    fading: &FadingDraw,
) -> LinkQuality {
    let power: Vec<f64> = topo
        .aps
        .iter()
        .map(|ap| ch.path_gain(ap.pos.dist(pos)) * fading.gain(user, ap.id))
        .collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for ap in &topo.aps {
        let p = power[ap.id];
        if p > best.1 {
            best = (ap.id, p);
        }
    }
    let serving = assignment.cluster_of(best.0);
    let (mut signal, mut interference) = (0.0, 0.0);
    for ap in &topo.aps {
        let p = power[ap.id];
        if assignment.cluster_of(ap.id) == serving {
            signal += p;
        } else {
            interference += p;
        }
    }
    let sinr = signal / (interference + ch.noise_power);
    LinkQuality {
        sinr,
        rate: (1.0 + sinr).log2(),
        strongest_ap: best.0,
        strongest_dist: topo.aps[best.0].pos.dist(pos),
    }
}

/// Effective region of one AP: the disc where its received power reaches
/// the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRegion {
    pub center: Point,
    pub radius: f64,
    empty: bool,
}

impl EffectiveRegion {
    pub fn contains(&self, p: Point) -> bool {
        !self.empty && self.center.dist_sq(p).max(MIN_DISTANCE * MIN_DISTANCE) <= self.radius * self.radius
    }

    /// True when the threshold exceeds the received power even at the clamp distance.
    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

pub fn effective_region(topo: &NetworkTopology, ch: &ChannelConfig, threshold: f64, ap: usize) -> EffectiveRegion {
    let radius = (ch.tx_power / threshold).powf(1.0 / ch.pathloss_exponent);
    EffectiveRegion {
        center: topo.aps[ap].pos,
        radius,
        empty: threshold > ch.path_gain(MIN_DISTANCE),
    }
}
