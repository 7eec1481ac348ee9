//! Clustered user traffic (Poisson-cluster style placement).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Point, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Serving area width (x) in meters, centered on the AP grid.
    pub area_width: f64,
    /// Serving area height (y) in meters, centered on the AP grid.
    pub area_height: f64,
    pub n_users: usize,
    pub n_clusters: usize,
    pub cluster_radius: f64,
    /// Data requested by each new user.
    pub demand: f64,
    /// Slots a user stays before its request times out.
    pub lifetime: u32,
    /// Data delivered per unit rate in one slot.
    pub slot_budget: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            area_width: 168.0,
            area_height: 182.0,
            n_users: 160,
            n_clusters: 10,
            cluster_radius: 40.0,
            demand: 8.0,
            lifetime: 2,
            slot_budget: 1.0,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.area_width > 0.0 && self.area_height > 0.0) {
            return Err(EnvError::Config("serving area must have positive size".into()));
        }
        if self.n_users > 0 && self.n_clusters == 0 {
            return Err(EnvError::Config("n_clusters must be >= 1 when users are present".into()));
        }
        if !(self.cluster_radius >= 0.0) || !(self.demand >= 0.0) || !(self.slot_budget >= 0.0) {
            return Err(EnvError::Config("cluster_radius, demand and slot_budget must be >= 0".into()));
        }
        if self.lifetime == 0 {
            return Err(EnvError::Config("lifetime must be >= 1 slot".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub pos: Point,
    pub demand_remaining: f64,
    /// Slots already spent on the grid.
    pub age: u32,
    /// Index of the parent point this user was scattered around.
    pub parent_cluster: usize,
}

/// Draws `n_users` users scattered uniformly in discs of radius
/// `cluster_radius` around `n_clusters` uniformly placed parents.
pub fn sample_users<R: Rng + ?Sized>(
    rng: &mut R,
    area: Rect,
    n_users: usize,
    n_clusters: usize,
    cluster_radius: f64,
    demand: f64,
) -> Result<Vec<UserState>, EnvError> {
    if n_users == 0 {
        return Ok(Vec::new());
    }
    if n_clusters == 0 {
        return Err(EnvError::Config("n_clusters must be >= 1 when users are present".into()));
    }
    let parents = sample_parents(rng, area, n_clusters);
    Ok(scatter_users(rng, area, &parents, n_users, cluster_radius, demand))
}

pub fn sample_parents<R: Rng + ?Sized>(rng: &mut R, area: Rect, n_clusters: usize) -> Vec<Point> {
    (0..n_clusters)
        .map(|_| Point::new(rng.gen_range(area.min.x..=area.max.x), rng.gen_range(area.min.y..=area.max.y)))
        .collect()
}

/// Places users around the given parents. Positions are clipped to the
/// area; every parent lies inside it, so clipping never moves a user
/// further from its parent.
pub fn scatter_users<R: Rng + ?Sized>(
    rng: &mut R,
    area: Rect,
    parents: &[Point],
    n_users: usize,
    cluster_radius: f64,
    demand: f64,
) -> Vec<UserState> {
    (0..n_users)
        .map(|_| {
            let parent = rng.gen_range(0..parents.len());
            let r = cluster_radius * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let p = parents[parent];
            UserState {
                pos: area.clamp(Point::new(p.x + r * phi.cos(), p.y + r * phi.sin())),
                demand_remaining: demand,
                age: 0,
                parent_cluster: parent,
            }
        })
        .collect()
}
