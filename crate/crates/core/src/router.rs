//! Height-aware weighted A* over the 2.5D grid and local-goal extraction.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::Polyline;
use crate::grid::{CellClass, HeightGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteOptions {
    /// `[w_d, w_h]` for explored cells.
    pub explored: [f64; 2],
    /// `[w_d, w_h]` for unexplored cells.
    pub unexplored: [f64; 2],
    /// Cells whose centers lie within this distance of an obstacle cell
    /// center pay `inflation_cost` on entry. Zero disables it.
    pub inflation: f64,
    pub inflation_cost: f64,
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self { explored: [1.0, 3.0], unexplored: [1.2, 0.0], inflation: 0.0, inflation_cost: 0.0 }
    }
}

impl RouteOptions {
    /// Distance-only weights everywhere.
    pub fn distance_only() -> Self {
        Self { explored: [1.0, 0.0], unexplored: [1.0, 0.0], ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPath {
    pub cells: Vec<(usize, usize)>,
    pub waypoints: Vec<[f64; 2]>,
    /// Sum of center-to-center edge lengths plus any inflation charges.
    pub cost: f64,
}

impl GlobalPath {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Normalised low-ceiling cost in `[0, 1]`; zero when nothing overhead is known.
pub fn height_cost(h: Option<f64>) -> f64 {
    match h {
        Some(h) if h.is_finite() => (1.0 - h.clamp(0.7, 1.0)) / 0.3,
        _ => 0.0,
    }
}

pub fn heuristic(grid: &HeightGrid, cell: (usize, usize), goal: [f64; 2], opts: &RouteOptions) -> f64 {
    let c = grid.center(cell.0, cell.1);
    let d = (c[0] - goal[0]).hypot(c[1] - goal[1]);
    let [wd, wh] = if grid.classify(cell.0, cell.1) == CellClass::Unexplored { opts.unexplored } else { opts.explored };
    wd * d + wh * height_cost(grid.height(cell.0, cell.1))
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed so the max-heap pops the smallest (f, h, idx).
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.h.total_cmp(&self.h)).then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Cells within `radius` of any obstacle cell center.
pub fn inflated_cells(grid: &HeightGrid, radius: f64) -> Vec<bool> {
    let (nx, ny) = grid.dims();
    let mut out = vec![false; nx * ny];
    if radius <= 0.0 {
        return out;
    }
    let reach = (radius / grid.resolution()).ceil() as i64;
    for j in 0..ny {
        for i in 0..nx {
            if grid.classify(i, j) != CellClass::Obstacle {
                continue;
            }
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let d = grid.resolution() * ((di * di + dj * dj) as f64).sqrt();
                    if d <= radius + 1e-9 {
                        out[grid.index(a as usize, b as usize)] = true;
                    }
                }
            }
        }
    }
    out
}

/// 8-connected weighted A*. Obstacle cells are never entered.
pub fn astar(grid: &HeightGrid, start: [f64; 2], goal: [f64; 2], opts: &RouteOptions) -> Result<GlobalPath> {
    let s = grid.cell_of(start).ok_or_else(|| Error::NoPath(format!("start {start:?} outside the grid")))?;
    let g_cell = grid.cell_of(goal).ok_or_else(|| Error::NoPath(format!("goal {goal:?} outside the grid")))?;
    if grid.classify(s.0, s.1) == CellClass::Obstacle {
        return Err(Error::BlockedStart(format!("start cell {s:?} is an obstacle")));
    }
    let (nx, ny) = grid.dims();
    let goal_center = grid.center(g_cell.0, g_cell.1);
    let inflated = inflated_cells(grid, opts.inflation);
    let mut g = vec![f64::INFINITY; nx * ny];
    let mut parent = vec![usize::MAX; nx * ny];
    let mut closed = vec![false; nx * ny];
    let mut heap = BinaryHeap::new();
    let si = grid.index(s.0, s.1);
    g[si] = 0.0;
    let h0 = heuristic(grid, s, goal_center, opts);
    heap.push(Open { f: h0, h: h0, idx: si });
    let gi = grid.index(g_cell.0, g_cell.1);
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == gi {
            break;
        }
        let (ci, cj) = (idx % nx, idx / nx);
        for (di, dj) in NEIGHBORS {
            let (a, b) = (ci as i64 + di, cj as i64 + dj);
            if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                continue;
            }
            let (a, b) = (a as usize, b as usize);
            let k = grid.index(a, b);
            if closed[k] || grid.classify(a, b) == CellClass::Obstacle {
                continue;
            }
            let step = if di != 0 && dj != 0 { std::f64::consts::SQRT_2 } else { 1.0 } * grid.resolution();
            let extra = if inflated[k] { opts.inflation_cost } else { 0.0 };
            let cand = g[idx] + step + extra;
            if cand < g[k] {
                g[k] = cand;
                parent[k] = idx;
                let h = heuristic(grid, (a, b), goal_center, opts);
                heap.push(Open { f: cand + h, h, idx: k });
            }
        }
    }
    if !closed[gi] {
        return Err(Error::NoPath(format!("no route from {s:?} to {g_cell:?}")));
    }
    let mut cells = vec![g_cell];
    let mut k = gi;
    while k != si {
        k = parent[k];
        cells.push((k % nx, k / nx));
    }
    cells.reverse();
    let waypoints = cells.iter().map(|&(i, j)| grid.center(i, j)).collect();
    let cost = path_cost(grid, &cells, &inflated, opts);
    Ok(GlobalPath { cells, waypoints, cost })
}

/// Cost of a cell path summed as straight and diagonal counts, so equal
/// paths always report bit-identical costs.
pub fn path_cost(grid: &HeightGrid, cells: &[(usize, usize)], inflated: &[bool], opts: &RouteOptions) -> f64 {
    let (mut straight, mut diag, mut charged) = (0usize, 0usize, 0usize);
    for w in cells.windows(2) {
        if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
            diag += 1;
        } else {
            straight += 1;
        }
        if inflated.get(grid.index(w[1].0, w[1].1)).copied().unwrap_or(false) {
            charged += 1;
        }
    }
    grid.resolution() * (straight as f64 + diag as f64 * std::f64::consts::SQRT_2)
        + charged as f64 * opts.inflation_cost
}

/// Point `lookahead` metres of arc length past the closest path point to
/// the robot, clamped to the final waypoint.
pub fn local_goal(path: &GlobalPath, robot: [f64; 2], lookahead: f64) -> [f64; 2] {
    let line = Polyline::new(path.waypoints.clone());
    let st = line.closest(robot);
    line.point(line.at(st.s + lookahead))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn free_grid(n: usize) -> HeightGrid {
        let mut g = HeightGrid::new(GridSpec { extent: [n as f64 * 0.5; 2], ..Default::default() }).unwrap();
        for j in 0..n {
            for i in 0..n {
                g.set_height(i, j, Some(f64::INFINITY), 1.0);
            }
        }
        g
    }

    #[test]
    fn heuristic_weights() {
        let mut g = free_grid(20);
        let goal = [0.25 + 5.0, 0.25];
        assert_eq!(heuristic(&g, (0, 0), goal, &RouteOptions::default()), 5.0);
        g.set_height(0, 0, Some(0.7), 1.0);
        assert!((heuristic(&g, (0, 0), goal, &RouteOptions::default()) - 8.0).abs() < 1e-12);
        g.set_height(0, 0, None, 0.0);
        assert!((heuristic(&g, (0, 0), goal, &RouteOptions::default()) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn straight_line_route() {
        let g = free_grid(10);
        let p = astar(&g, [0.0, 0.0], [0.0, 4.5], &RouteOptions::default()).unwrap();
        assert_eq!(p.cost, 4.5);
        assert_eq!(p.cells.len(), 10);
        assert!(p.cells.iter().all(|c| c.0 == 0));
    }

    #[test]
    fn blocked_start_and_no_path() {
        let mut g = free_grid(6);
        g.set_height(0, 0, Some(0.2), 1.0);
        assert!(matches!(astar(&g, [0.1, 0.1], [2.0, 2.0], &RouteOptions::default()), Err(Error::BlockedStart(_))));
        for j in 0..6 {
            g.set_height(3, j, Some(0.2), 1.0);
        }
        assert!(matches!(astar(&g, [0.3, 1.0], [2.9, 1.0], &RouteOptions::default()), Err(Error::NoPath(_))));
    }

    #[test]
    fn local_goal_clamps_and_interpolates() {
        let path =
            GlobalPath { cells: vec![], waypoints: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], cost: 3.0 };
        assert_eq!(local_goal(&path, [0.0, 0.0], 1.0), [1.0, 0.0]);
        assert_eq!(local_goal(&path, [2.7, 0.0], 1.0), [3.0, 0.0]);
        let l = GlobalPath { cells: vec![], waypoints: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]], cost: 3.0 };
        let p = local_goal(&l, [1.0, 0.0], 1.0);
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
    }
}
