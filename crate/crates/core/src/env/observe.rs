//! Local observations: a two-channel occupancy image around each AP and a
//! compact sector-count vector for linear approximators.

use serde::{Deserialize, Serialize};

use super::topology::HEX_DIRECTIONS;
use super::traffic::UserState;
use super::world::Scenario;

pub const SECTORS: usize = 8;
pub const RINGS: usize = 2;
pub const COMPACT_LEN: usize = SECTORS * RINGS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    /// Cells per side of the observation image.
    pub grid_size: usize,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self { grid_size: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub grid_size: usize,
    /// Channel-major image: users in channel 0, neighbor APs in channel 1.
    pub grid: Vec<f64>,
    /// User counts per (ring, sector), ring-major.
    pub compact: Vec<f64>,
    /// Which hex directions hold a neighbor AP.
    pub neighbor_dirs: [bool; HEX_DIRECTIONS],
}

impl Observation {
    pub fn cell(&self, channel: usize, row: usize, col: usize) -> f64 {
        let g = self.grid_size;
        self.grid[channel * g * g + row * g + col]
    }
}

/// Observation of `ap`. The image spans the square circumscribing the AP's
/// effective region; neighbor APs outside that square are drawn on the
/// border cell in their direction.
pub fn observe(scn: &Scenario, users: &[UserState], ap: usize, cfg: &ObservationConfig) -> Observation {
    let g = cfg.grid_size.max(1);
    let center = scn.topo.aps[ap].pos;
    let half = scn.topo.effective_radius;
    let cell = 2.0 * half / g as f64;
    let mut grid = vec![0.0; 2 * g * g];
    let mut compact = vec![0.0; COMPACT_LEN];

    let to_cell = |dx: f64, dy: f64| -> (usize, usize) {
        let col = (((dx + half) / cell).floor() as isize).clamp(0, g as isize - 1) as usize;
        let row = (((dy + half) / cell).floor() as isize).clamp(0, g as isize - 1) as usize;
        (row, col)
    };

    for u in users {
        let (dx, dy) = (u.pos.x - center.x, u.pos.y - center.y);
        if dx.abs() <= half && dy.abs() <= half {
            let (row, col) = to_cell(dx, dy);
            grid[row * g + col] += 1.0;
        }
        let d = (dx * dx + dy * dy).sqrt();
        if d <= half {
            let angle = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
            let sector = ((angle / std::f64::consts::TAU * SECTORS as f64) as usize).min(SECTORS - 1);
            let ring = if d < half / 2.0 { 0 } else { 1 };
            compact[ring * SECTORS + sector] += 1.0;
        }
    }
    let max = grid[..g * g].iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut grid[..g * g] {
            *v /= max;
        }
    }

    let mut neighbor_dirs = [false; HEX_DIRECTIONS];
    for &j in &scn.topo.neighbors[ap] {
        let p = scn.topo.aps[j].pos;
        let (dx, dy) = (p.x - center.x, p.y - center.y);
        // project onto the window border along the direction to the neighbor
        let scale = (half / dx.abs().max(dy.abs()).max(f64::MIN_POSITIVE)).min(1.0);
        let (row, col) = to_cell(dx * scale, dy * scale);
        grid[g * g + row * g + col] = 1.0;
        if let Some(d) = scn.topo.direction_of(ap, j) {
            neighbor_dirs[d] = true;
        }
    }

    Observation { grid_size: g, grid, compact, neighbor_dirs }
}
