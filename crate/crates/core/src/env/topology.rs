//! Access-point layout, neighbor graph and per-AP cooperation action sets.

use serde::{Deserialize, Serialize};

use super::channel::ChannelConfig;
use super::{EnvError, Point};

/// Number of canonical hex directions. Every neighbor of an AP is mapped to
/// one of these sectors (30°, 90°, ..., 330° centered).
pub const HEX_DIRECTIONS: usize = 6;

/// Which multi-neighbor requests an AP may issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRestriction {
    /// Requested neighbors must form a connected set in the neighbor graph.
    AdjacentPairsOnly,
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub rows: usize,
    pub cols: usize,
    /// Column pitch in meters.
    pub spacing_x: f64,
    /// Row pitch in meters; odd columns are shifted down by half of it.
    pub spacing_y: f64,
    pub max_cluster_size: usize,
    /// Received-power threshold (W) that bounds an AP's effective region.
    pub effective_threshold: f64,
    pub pair_restriction: PairRestriction,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 5,
            spacing_x: 44.3,
            spacing_y: 52.0,
            max_cluster_size: 3,
            // 32 m effective radius for P = 1 W, alpha = 4
            effective_threshold: 32f64.powi(-4),
            pair_restriction: PairRestriction::AdjacentPairsOnly,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(EnvError::Config(format!(
                "grid must have at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.max_cluster_size == 0 {
            return Err(EnvError::Config("max_cluster_size must be >= 1".into()));
        }
        if !(self.spacing_x > 0.0 && self.spacing_y > 0.0) {
            return Err(EnvError::Config("AP spacing must be positive".into()));
        }
        if !(self.effective_threshold > 0.0) || !self.effective_threshold.is_finite() {
            return Err(EnvError::Config("effective_threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: usize,
    pub pos: Point,
}

/// Built network: AP positions, symmetric neighbor lists and the action
/// catalogue each AP chooses from.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub aps: Vec<AccessPoint>,
    /// Sorted neighbor ids per AP.
    pub neighbors: Vec<Vec<usize>>,
    pub effective_radius: f64,
    pub max_cluster_size: usize,
    pub pair_restriction: PairRestriction,
    /// `directions[ap][d]` is the neighbor lying in hex sector `d`, if any.
    directions: Vec<[Option<usize>; HEX_DIRECTIONS]>,
    actions: Vec<Vec<Vec<usize>>>,
    action_slots: Vec<Vec<usize>>,
    slot_layout: Vec<Vec<usize>>,
}

/// Lays out a column-offset hex grid and derives the neighbor graph.
///
/// Neighbors are APs closer than 1.2 times the smaller grid pitch. The
/// effective radius solves `P * r^-alpha = threshold`.
pub fn build_topology(cfg: &TopologyConfig, ch: &ChannelConfig) -> Result<NetworkTopology, EnvError> {
    cfg.validate()?;
    ch.validate()?;

    let mut aps = Vec::with_capacity(cfg.rows * cfg.cols);
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            let shift = if c % 2 == 1 { cfg.spacing_y / 2.0 } else { 0.0 };
            aps.push(AccessPoint {
                id: r * cfg.cols + c,
                pos: Point::new(c as f64 * cfg.spacing_x, r as f64 * cfg.spacing_y + shift),
            });
        }
    }

    let reach = 1.2 * cfg.spacing_x.min(cfg.spacing_y);
    let n = aps.len();
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && aps[i].pos.dist(aps[j].pos) <= reach {
                neighbors[i].push(j);
            }
        }
    }

    let mut directions = vec![[None; HEX_DIRECTIONS]; n];
    for i in 0..n {
        for &j in &neighbors[i] {
            let d = direction_sector(aps[i].pos, aps[j].pos);
            if let Some(prev) = directions[i][d] {
                return Err(EnvError::Config(format!(
                    "neighbors {prev} and {j} of AP {i} fall in the same hex direction; \
                     spacing does not form a hexagonal layout"
                )));
            }
            directions[i][d] = Some(j);
        }
    }

    let effective_radius = (ch.tx_power / cfg.effective_threshold).powf(1.0 / ch.pathloss_exponent);

    let mut topo = NetworkTopology {
        aps,
        neighbors,
        effective_radius,
        max_cluster_size: cfg.max_cluster_size,
        pair_restriction: cfg.pair_restriction,
        directions,
        actions: Vec::new(),
        action_slots: Vec::new(),
        slot_layout: Vec::new(),
    };
    topo.slot_layout = slot_layout(cfg.max_cluster_size, cfg.pair_restriction);
    for ap in 0..n {
        let acts = enumerate_actions(&topo, ap);
        let slots = acts
            .iter()
            .map(|a| {
                let mut dirs: Vec<usize> = a.iter().map(|&j| topo.direction_of(ap, j).unwrap()).collect();
                dirs.sort_unstable();
                topo.slot_layout.iter().position(|s| *s == dirs).unwrap()
            })
            .collect();
        topo.actions.push(acts);
        topo.action_slots.push(slots);
    }
    Ok(topo)
}

fn direction_sector(from: Point, to: Point) -> usize {
    let angle = (to.y - from.y).atan2(to.x - from.x).to_degrees().rem_euclid(360.0);
    ((angle / 60.0).floor() as usize) % HEX_DIRECTIONS
}

/// Canonical action layout over hex directions: no-op, then every direction
/// subset allowed by the cluster cap and pair restriction.
fn slot_layout(max_cluster_size: usize, restriction: PairRestriction) -> Vec<Vec<usize>> {
    let dirs: Vec<usize> = (0..HEX_DIRECTIONS).collect();
    let adjacent = |a: usize, b: usize| {
        let d = (a + HEX_DIRECTIONS - b) % HEX_DIRECTIONS;
        d == 1 || d == HEX_DIRECTIONS - 1
    };
    subsets_by_size(&dirs, max_cluster_size.saturating_sub(1), |s| {
        restriction == PairRestriction::AllPairs || is_connected(s, adjacent)
    })
}

/// Ordered local action list for one AP.
///
/// Index 0 is the no-op, followed by single requests in neighbor-id order,
/// then larger requests in lexicographic order, up to `max_cluster_size - 1`
/// requested neighbors.
pub fn enumerate_actions(topo: &NetworkTopology, ap: usize) -> Vec<Vec<usize>> {
    let nbrs = &topo.neighbors[ap];
    subsets_by_size(nbrs, topo.max_cluster_size.saturating_sub(1), |s| {
        topo.pair_restriction == PairRestriction::AllPairs
            || is_connected(s, |a, b| topo.neighbors[a].binary_search(&b).is_ok())
    })
}

fn subsets_by_size(
    items: &[usize],
    max_size: usize,
    keep: impl Fn(&[usize]) -> bool,
) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for size in 1..=max_size.min(items.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<usize> = idx.iter().map(|&k| items[k]).collect();
            if keep(&subset) {
                out.push(subset);
            }
            // advance to the next combination in lexicographic order
            let mut k = size;
            while k > 0 && idx[k - 1] == items.len() - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for m in k..size {
                idx[m] = idx[m - 1] + 1;
            }
        }
    }
    out
}

fn is_connected(set: &[usize], adjacent: impl Fn(usize, usize) -> bool) -> bool {
    if set.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; set.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for m in 0..set.len() {
            if !seen[m] && adjacent(set[k], set[m]) {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

impl NetworkTopology {
    pub fn len(&self) -> usize {
        self.aps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aps.is_empty()
    }

    pub fn is_neighbor(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Hex sector in which neighbor `nbr` lies as seen from `ap`.
    pub fn direction_of(&self, ap: usize, nbr: usize) -> Option<usize> {
        self.directions[ap].iter().position(|d| *d == Some(nbr))
    }

    pub fn neighbor_in_direction(&self, ap: usize, dir: usize) -> Option<usize> {
        self.directions[ap][dir]
    }

    pub fn actions(&self, ap: usize) -> &[Vec<usize>] {
        &self.actions[ap]
    }

    /// Canonical slot of each entry of [`NetworkTopology::actions`].
    pub fn action_slots(&self, ap: usize) -> &[usize] {
        &self.action_slots[ap]
    }

    /// Size of the direction-indexed action layout shared by all APs.
    pub fn slot_count(&self) -> usize {
        self.slot_layout.len()
    }

    /// Mask over canonical slots that are realizable at `ap`.
    pub fn slot_mask(&self, ap: usize) -> Vec<bool> {
        let mut mask = vec![false; self.slot_count()];
        for &s in &self.action_slots[ap] {
            mask[s] = true;
        }
        mask
    }

    /// Maps a canonical slot back to the AP's local action index.
    pub fn action_for_slot(&self, ap: usize, slot: usize) -> Option<usize> {
        self.action_slots[ap].iter().position(|&s| s == slot)
    }

    /// Axis-aligned bounding box of AP positions as (min, max).
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for ap in &self.aps {
            lo.x = lo.x.min(ap.pos.x);
            lo.y = lo.y.min(ap.pos.y);
            hi.x = hi.x.max(ap.pos.x);
            hi.y = hi.y.max(ap.pos.y);
        }
        (lo, hi)
    }

    /// Restricts the topology to the given APs, renumbering them densely in
    /// the order given. Used to cut small patches for exhaustive evaluation.
    pub fn subgraph(&self, keep: &[usize]) -> NetworkTopology {
        let remap = |old: usize| keep.iter().position(|&k| k == old);
        let aps: Vec<AccessPoint> = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| AccessPoint { id: new, pos: self.aps[old].pos })
            .collect();
        let mut neighbors: Vec<Vec<usize>> = keep
            .iter()
            .map(|&old| self.neighbors[old].iter().filter_map(|&j| remap(j)).collect())
            .collect();
        for n in &mut neighbors {
            n.sort_unstable();
        }
        let directions = keep
            .iter()
            .map(|&old| {
                let mut d = [None; HEX_DIRECTIONS];
                for (k, slot) in self.directions[old].iter().enumerate() {
                    d[k] = slot.and_then(remap);
                }
                d
            })
            .collect();
        let mut topo = NetworkTopology {
            aps,
            neighbors,
            effective_radius: self.effective_radius,
            max_cluster_size: self.max_cluster_size,
            pair_restriction: self.pair_restriction,
            directions,
            actions: Vec::new(),
            action_slots: Vec::new(),
            slot_layout: self.slot_layout.clone(),
        };
        for ap in 0..topo.len() {
            let acts = enumerate_actions(&topo, ap);
            let slots = acts
                .iter()
                .map(|a| {
                    let mut dirs: Vec<usize> = a.iter().map(|&j| topo.direction_of(ap, j).unwrap()).collect();
                    dirs.sort_unstable();
                    topo.slot_layout.iter().position(|s| *s == dirs).unwrap()
                })
                .collect();
            topo.actions.push(acts);
            topo.action_slots.push(slots);
        }
        topo
    }
}
