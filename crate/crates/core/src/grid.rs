//! Regular grid geometry shared by the occupancy map and the costmap layers.
//!
//! Cell `(i, j)` covers `[ox + i·res, ox + (i+1)·res) × [oy + j·res, oy + (j+1)·res)`;
//! `j = 0` is the bottom row. Storage is row-major with index `j·width + i`.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub resolution: f64,
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(resolution: f64, origin: Vec2, width: usize, height: usize) -> Self {
        Self { resolution, origin, width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn extent(&self) -> Vec2 {
        Vec2::new(self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    /// Signed cell coordinates of a world point, without bounds checking.
    pub fn cell_of(&self, p: Vec2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    pub fn world_to_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let (i, j) = self.cell_of(p);
        self.in_bounds(i, j).then_some((i as usize, j as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Inclusive cell-index window covering the axis-aligned box `center ± radius`,
    /// clipped to the grid. `None` when the box misses the grid.
    pub fn window(&self, center: Vec2, radius: f64) -> Option<(usize, usize, usize, usize)> {
        self.window_box(center - Vec2::new(radius, radius), center + Vec2::new(radius, radius))
    }

    /// Inclusive cell range covering the box `[lo, hi]`, clipped to the grid.
    pub fn window_box(&self, lo: Vec2, hi: Vec2) -> Option<(usize, usize, usize, usize)> {
        let (i0, j0) = self.cell_of(lo);
        let (i1, j1) = self.cell_of(hi);
        let i0 = i0.max(0);
        let j0 = j0.max(0);
        let i1 = i1.min(self.width as i64 - 1);
        let j1 = j1.min(self.height as i64 - 1);
        (i0 <= i1 && j0 <= j1).then_some((i0 as usize, j0 as usize, i1 as usize, j1 as usize))
    }

    /// Walks the cells pierced by the ray `start + t·dir`, `t ∈ [0, max_t]`, in order.
    ///
    /// `dir` must be a unit vector. The callback receives the cell and the ray
    /// parameter at which the ray enters it (0 for the starting cell) and returns
    /// `false` to stop the walk.
    pub fn traverse<F>(&self, start: Vec2, dir: Vec2, max_t: f64, mut visit: F)
    where
        F: FnMut(usize, usize, f64) -> bool,
    {
        let lo = self.origin;
        let hi = self.origin + self.extent();
        // clip the ray against the grid box
        let mut t0 = 0.0f64;
        let mut t1 = max_t;
        for (s, d, l, h) in [(start.x, dir.x, lo.x, hi.x), (start.y, dir.y, lo.y, hi.y)] {
            if d.abs() < 1e-15 {
                if s < l || s >= h {
                    return;
                }
            } else {
                let a = (l - s) / d;
                let b = (h - s) / d;
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        if t0 > t1 {
            return;
        }

        let entry = start + dir * t0;
        let (mut i, mut j) = self.cell_of(entry);
        i = i.clamp(0, self.width as i64 - 1);
        j = j.clamp(0, self.height as i64 - 1);
        let res = self.resolution;

        let axis = |s: f64, d: f64, c: i64, o: f64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, (o + (c + 1) as f64 * res - s) / d, res / d)
            } else if d < 0.0 {
                (-1, (o + c as f64 * res - s) / d, -res / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_i, mut next_x, delta_x) = axis(start.x, dir.x, i, lo.x);
        let (step_j, mut next_y, delta_y) = axis(start.y, dir.y, j, lo.y);

        let mut t_enter = t0;
        loop {
            if !visit(i as usize, j as usize, t_enter) {
                return;
            }
            if next_x < next_y {
                t_enter = next_x;
                next_x += delta_x;
                i += step_i;
            } else {
                t_enter = next_y;
                next_y += delta_y;
                j += step_j;
            }
            if t_enter > t1 || !self.in_bounds(i, j) {
                return;
            }
        }
    }
}

/// Binary occupancy map of the static environment.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(geometry: GridGeometry) -> Self {
        Self { occupied: vec![false; geometry.len()], geometry }
    }

    pub fn from_cells(geometry: GridGeometry, occupied: Vec<bool>) -> Self {
        assert_eq!(occupied.len(), geometry.len());
        Self { geometry, occupied }
    }

    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.occupied[self.geometry.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let idx = self.geometry.index(i, j);
        self.occupied[idx] = value;
    }

    /// Occupancy at a world point; points off the map read as free.
    pub fn occupied_at(&self, p: Vec2) -> bool {
        self.geometry.world_to_cell(p).is_some_and(|(i, j)| self.is_occupied(i, j))
    }

    pub fn cells(&self) -> &[bool] {
        &self.occupied
    }

    /// Marks every cell whose center lies in the axis-aligned box `[min, max]`.
    pub fn fill_rect(&mut self, min: Vec2, max: Vec2) {
        let g = self.geometry;
        for j in 0..g.height {
            for i in 0..g.width {
                let c = g.cell_center(i, j);
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set(i, j, true);
                }
            }
        }
    }

    /// True when a disc overlaps any occupied cell (strict overlap).
    pub fn disc_hits_occupied(&self, center: Vec2, radius: f64) -> bool {
        let g = self.geometry;
        let Some((i0, j0, i1, j1)) = g.window(center, radius) else {
            return false;
        };
        for j in j0..=j1 {
            for i in i0..=i1 {
                if self.is_occupied(i, j) && disc_overlaps_cell(&g, i, j, center, radius) {
                    return true;
                }
            }
        }
        false
    }

    /// True when the straight segment `a → b` crosses no occupied cell.
    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        let d = b - a;
        let Some(dir) = d.normalized(1e-12) else {
            return !self.occupied_at(a);
        };
        let len = d.norm();
        let mut clear = true;
        self.geometry.traverse(a, dir, len, |i, j, _| {
            if self.is_occupied(i, j) {
                clear = false;
            }
            clear
        });
        clear
    }
}

/// Strict disc/cell-square overlap: distance from the disc center to the
/// nearest point of the cell is below the radius.
pub fn disc_overlaps_cell(g: &GridGeometry, i: usize, j: usize, center: Vec2, radius: f64) -> bool {
    let x0 = g.origin.x + i as f64 * g.resolution;
    let y0 = g.origin.y + j as f64 * g.resolution;
    let nx = center.x.clamp(x0, x0 + g.resolution);
    let ny = center.y.clamp(y0, y0 + g.resolution);
    Vec2::new(nx, ny).distance(center) < radius
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(0.1, Vec2::ZERO, 100, 100)
    }

    #[test]
    fn cell_round_trip() {
        let g = geom();
        assert_eq!(g.world_to_cell(Vec2::new(0.05, 0.05)), Some((0, 0)));
        assert_eq!(g.world_to_cell(Vec2::new(9.99, 0.0)), Some((99, 0)));
        assert_eq!(g.world_to_cell(Vec2::new(10.0, 0.0)), None);
        assert_eq!(g.world_to_cell(Vec2::new(-0.01, 0.0)), None);
        let c = g.cell_center(3, 4);
        assert_eq!(g.world_to_cell(c), Some((3, 4)));
    }

    #[test]
    fn traversal_visits_contiguous_cells() {
        let g = geom();
        let mut cells = Vec::new();
        let dir = Vec2::new(1.0, 1.0).normalized(1e-9).unwrap();
        g.traverse(Vec2::new(0.05, 0.05), dir, 1.0, |i, j, _| {
            cells.push((i, j));
            true
        });
        assert_eq!(cells[0], (0, 0));
        for w in cells.windows(2) {
            let di = w[1].0 as i64 - w[0].0 as i64;
            let dj = w[1].1 as i64 - w[0].1 as i64;
            assert!(di.abs() + dj.abs() >= 1 && di.abs() <= 1 && dj.abs() <= 1);
        }
        let last = *cells.last().unwrap();
        assert!(last.0 >= 7 && last.1 >= 7);
    }

    #[test]
    fn traversal_entry_distance_matches_boundary() {
        let g = geom();
        let mut entry_of_20 = None;
        g.traverse(Vec2::new(0.05, 5.05), Vec2::new(1.0, 0.0), 5.0, |i, _, t| {
            if i == 20 {
                entry_of_20 = Some(t);
            }
            true
        });
        assert!((entry_of_20.unwrap() - 1.95).abs() < 1e-9);
    }

    #[test]
    fn line_of_sight_blocked_by_wall() {
        let mut grid = OccupancyGrid::empty(geom());
        grid.fill_rect(Vec2::new(5.0, 0.0), Vec2::new(5.1, 10.0));
        assert!(!grid.line_of_sight(Vec2::new(1.0, 5.0), Vec2::new(9.0, 5.0)));
        assert!(grid.line_of_sight(Vec2::new(1.0, 5.0), Vec2::new(4.0, 2.0)));
    }
}
