//! Cost-weighted 8-connected grid search over the merged costmap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::costmap::{CostmapStack, INSCRIBED};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::world::scenario::NEIGHBORS_8;

/// Step cost is `length · (1 + cost / PATH_COST_SCALE)`.
pub const PATH_COST_SCALE: f64 = 64.0;
/// Waypoint spacing after decimation, meters.
pub const WAYPOINT_SPACING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, ties broken by cell index
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cells with master cost at or above this block the search.
pub fn is_blocking(cost: u8) -> bool {
    cost >= INSCRIBED
}

pub fn step_cost(length: f64, cell_cost: u8) -> f64 {
    length * (1.0 + cell_cost as f64 / PATH_COST_SCALE)
}

/// Minimal-cost cell sequence from the start cell to the goal cell, inclusive.
///
/// The start cell is always enterable so a robot brushing an inflated wall
/// can still plan out; a blocked goal cell yields [`Error::NoPath`].
pub fn plan_grid_path(stack: &CostmapStack, start: Vec2, goal: Vec2) -> Result<Vec<(usize, usize)>> {
    let g = *stack.geometry();
    let master = stack.master();
    let (si, sj) = g.world_to_cell(start).ok_or(Error::OutOfBounds { x: start.x, y: start.y })?;
    let (gi, gj) = g.world_to_cell(goal).ok_or(Error::OutOfBounds { x: goal.x, y: goal.y })?;
    let (s_idx, g_idx) = (g.index(si, sj), g.index(gi, gj));
    if is_blocking(master[g_idx]) && g_idx != s_idx {
        return Err(Error::NoPath);
    }
    let res = g.resolution;
    let heuristic = |i: usize, j: usize| {
        let dx = (i as f64 - gi as f64).abs();
        let dy = (j as f64 - gj as f64).abs();
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        res * (hi - lo + lo * std::f64::consts::SQRT_2)
    };

    let n = g.len();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    best[s_idx] = 0.0;
    open.push(Open { f: heuristic(si, sj), idx: s_idx });

    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == g_idx {
            let mut cells = Vec::new();
            let mut k = idx;
            while k != usize::MAX {
                cells.push((k % g.width, k / g.width));
                k = parent[k];
            }
            cells.reverse();
            return Ok(cells);
        }
        let (i, j) = (idx % g.width, idx / g.width);
        for (di, dj) in NEIGHBORS_8 {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if !g.in_bounds(ni, nj) {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            let nidx = g.index(ni, nj);
            if closed[nidx] || is_blocking(master[nidx]) {
                continue;
            }
            let len = if di != 0 && dj != 0 { res * std::f64::consts::SQRT_2 } else { res };
            let cand = best[idx] + step_cost(len, master[nidx]);
            if cand < best[nidx] {
                best[nidx] = cand;
                parent[nidx] = idx;
                open.push(Open { f: cand + heuristic(ni, nj), idx: nidx });
            }
        }
    }
    Err(Error::NoPath)
}

/// Total step cost of a cell path under the current master grid.
pub fn path_cost(stack: &CostmapStack, cells: &[(usize, usize)]) -> f64 {
    let g = stack.geometry();
    cells
        .windows(2)
        .map(|w| {
            let diag = w[0].0 != w[1].0 && w[0].1 != w[1].1;
            let len = if diag { g.resolution * std::f64::consts::SQRT_2 } else { g.resolution };
            step_cost(len, stack.master()[g.index(w[1].0, w[1].1)])
        })
        .sum()
}

/// Plans and decimates to waypoints roughly [`WAYPOINT_SPACING`] apart,
/// excluding the start cell and ending exactly at `goal`.
pub fn plan_global_path(stack: &CostmapStack, start: Vec2, goal: Vec2) -> Result<Vec<Vec2>> {
    let cells = plan_grid_path(stack, start, goal)?;
    let g = stack.geometry();
    let stride = ((WAYPOINT_SPACING / g.resolution).round() as usize).max(1);
    let mut out: Vec<Vec2> = cells
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(k, _)| k % stride == 0)
        .map(|(_, &(i, j))| g.cell_center(i, j))
        .collect();
    if out.last().is_some_and(|last| g.world_to_cell(*last) == g.world_to_cell(goal)) {
        out.pop();
    }
    out.push(goal);
    Ok(out)
}
