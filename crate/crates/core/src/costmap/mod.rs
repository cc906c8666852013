//! Layered costmap: static, obstacle and social layers merged by per-cell maximum.

pub mod social;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec2};
use crate::grid::{GridGeometry, OccupancyGrid};
use crate::world::LidarScan;
pub use social::{FollowBand, SocialEntityAttr};

pub const LETHAL: u8 = 254;
/// Cells within the robot radius of a static obstacle.
pub const INSCRIBED: u8 = 253;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Static,
    Obstacle,
    Social,
    Master,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostmapStack {
    geometry: GridGeometry,
    static_layer: Vec<u8>,
    obstacle: Vec<u8>,
    /// Stored unquantized; rounded only when merged.
    social: Vec<f64>,
    master: Vec<u8>,
}

/// Social values are rounded to the nearest integer cost on merge.
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, LETHAL as f64) as u8
}

impl CostmapStack {
    pub fn new(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self { geometry, static_layer: vec![0; n], obstacle: vec![0; n], social: vec![0.0; n], master: vec![0; n] }
    }

    /// Static layer from an occupancy map: occupied cells lethal, cells whose
    /// centers lie within `inflation_radius` of an occupied cell center inscribed.
    pub fn from_static_map(map: &OccupancyGrid, inflation_radius: f64) -> Self {
        let g = map.geometry;
        let mut stack = Self::new(g);
        for j in 0..g.height {
            for i in 0..g.width {
                if !map.is_occupied(i, j) {
                    continue;
                }
                let center = g.cell_center(i, j);
                stack.static_layer[g.index(i, j)] = LETHAL;
                if let Some((i0, j0, i1, j1)) = g.window(center, inflation_radius) {
                    for nj in j0..=j1 {
                        for ni in i0..=i1 {
                            let idx = g.index(ni, nj);
                            if stack.static_layer[idx] < INSCRIBED
                                && g.cell_center(ni, nj).distance(center) <= inflation_radius + 1e-9
                            {
                                stack.static_layer[idx] = INSCRIBED;
                            }
                        }
                    }
                }
            }
        }
        stack.merge_layers();
        stack
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn static_layer(&self) -> &[u8] {
        &self.static_layer
    }

    pub fn static_layer_mut(&mut self) -> &mut [u8] {
        &mut self.static_layer
    }

    pub fn obstacle_layer(&self) -> &[u8] {
        &self.obstacle
    }

    pub fn obstacle_layer_mut(&mut self) -> &mut [u8] {
        &mut self.obstacle
    }

    pub fn social_layer(&self) -> &[f64] {
        &self.social
    }

    pub fn social_layer_mut(&mut self) -> &mut [f64] {
        &mut self.social
    }

    pub fn master(&self) -> &[u8] {
        &self.master
    }

    /// A layer as 8-bit costs (the social layer is quantized).
    pub fn layer_bytes(&self, layer: Layer) -> Vec<u8> {
        match layer {
            Layer::Static => self.static_layer.clone(),
            Layer::Obstacle => self.obstacle.clone(),
            Layer::Social => self.social.iter().map(|&v| quantize(v)).collect(),
            Layer::Master => self.master.clone(),
        }
    }

    /// Lethal in a physical layer (static map or sensed obstacle).
    pub fn physically_lethal(&self, idx: usize) -> bool {
        self.static_layer[idx] == LETHAL || self.obstacle[idx] == LETHAL
    }

    /// Clears each beam's free span, then marks endpoints closer than max range.
    ///
    /// Clearing precedes marking so that a beam passing through another beam's
    /// endpoint cell does not erase the hit.
    pub fn update_obstacle_layer(&mut self, scan: &LidarScan, pose: &Pose) {
        let g = self.geometry;
        let cfg = scan.config();
        let origin = pose.position();
        let mut hits = Vec::new();
        for (k, &r) in scan.ranges.iter().enumerate() {
            let dir = Vec2::from_angle(pose.theta + cfg.beam_angle(k));
            let obstacle = &mut self.obstacle;
            g.traverse(origin, dir, r, |i, j, t| {
                if t < r {
                    obstacle[g.index(i, j)] = 0;
                }
                true
            });
            if r < scan.max_range {
                // nudge past the surface so boundary hits land in the struck cell
                if let Some((i, j)) = g.world_to_cell(origin + dir * (r + 1e-4)) {
                    hits.push(g.index(i, j));
                }
            }
        }
        for idx in hits {
            self.obstacle[idx] = LETHAL;
        }
    }

    /// Rebuilds the social layer from `entities`; stale markers vanish.
    ///
    /// Overlapping fields combine by per-cell maximum. Every marker is
    /// validated before the layer is touched, so a rejected set leaves it as is.
    pub fn apply_social_entities(&mut self, entities: &[SocialEntityAttr]) -> Result<()> {
        for e in entities {
            e.validate()?;
            if !e.is_anchored() {
                return Err(Error::Validation(format!("marker `{}` has no position", e.entity_id)));
            }
        }
        self.social.fill(0.0);
        let g = self.geometry;
        for e in entities {
            let (lo, hi) = e.bounds().expect("checked above");
            let Some((i0, j0, i1, j1)) = g.window_box(lo, hi) else {
                continue;
            };
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let d = e.distance_from(g.cell_center(i, j)).expect("checked above");
                    let v = e.cost_at_distance(d);
                    let cell = &mut self.social[g.index(i, j)];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn clear_social(&mut self) {
        self.social.fill(0.0);
    }

    /// `master[i] = max(static[i], obstacle[i], social[i])`.
    pub fn merge_layers(&mut self) {
        for (((m, &s), &o), &soc) in
            self.master.iter_mut().zip(&self.static_layer).zip(&self.obstacle).zip(&self.social)
        {
            *m = s.max(o).max(quantize(soc));
        }
    }

    pub fn cost_at(&self, p: Vec2) -> Option<u8> {
        self.geometry.world_to_cell(p).map(|(i, j)| self.master[self.geometry.index(i, j)])
    }

    /// Master cost of the containing cell and its central-difference gradient
    /// in cost units per meter (one-sided at the grid edge).
    pub fn sample(&self, p: Vec2) -> Result<(u8, Vec2)> {
        let g = &self.geometry;
        let (i, j) = g.world_to_cell(p).ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
        let m = |i: usize, j: usize| self.master[g.index(i, j)] as f64;
        let diff = |lo: usize, hi: usize, span: usize, value: &dyn Fn(usize) -> f64| -> f64 {
            if span == 0 {
                0.0
            } else {
                (value(hi) - value(lo)) / span as f64
            }
        };
        let (il, ih) = (i.saturating_sub(1), (i + 1).min(g.width - 1));
        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(g.height - 1));
        let gx = diff(il, ih, ih - il, &|x| m(x, j));
        let gy = diff(jl, jh, jh - jl, &|y| m(i, y));
        Ok((self.master[g.index(i, j)], Vec2::new(gx / g.resolution, gy / g.resolution)))
    }

    /// Portable graymap of one layer, top row first.
    pub fn layer_pgm(&self, layer: Layer) -> Vec<u8> {
        let g = self.geometry;
        let bytes = self.layer_bytes(layer);
        let mut rows = Vec::with_capacity(bytes.len());
        for r in 0..g.height {
            let j = g.height - 1 - r;
            rows.extend_from_slice(&bytes[j * g.width..(j + 1) * g.width]);
        }
        crate::world::scenario::write_pgm(g.width, g.height, &rows)
    }
}
