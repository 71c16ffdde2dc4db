//! 2.5D admissible-height map.
//!
//! Each coarse cell keeps the lowest overhead point seen inside it and a
//! bitmask of the fine sub-cells that any point has landed in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// World coordinates of the lower-left corner of cell (0, 0).
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub resolution: f64,
    pub sub_resolution: f64,
    /// Points below this height count as ground evidence only.
    pub ground_z: f64,
    /// Subtracted from overhead points before they become admissible heights.
    pub stack_height: f64,
    pub coverage_threshold: f64,
    pub obstacle_height: f64,
    pub free_height: f64,
    /// Width and length of the local-map box.
    pub local_width: f64,
    pub local_length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            origin: [0.0, 0.0],
            extent: [20.0, 20.0],
            resolution: 0.5,
            sub_resolution: 0.1,
            ground_z: 0.15,
            stack_height: 0.0,
            coverage_threshold: 0.6,
            obstacle_height: 0.7,
            free_height: 1.0,
            local_width: 1.2,
            local_length: 2.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Obstacle,
    HeightConstrained,
    Free,
    Unexplored,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub accepted: usize,
    pub out_of_extent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    spec: GridSpec,
    nx: usize,
    ny: usize,
    sub: usize,
    /// `None` until anything is seen; `+∞` when only ground was seen.
    height: Vec<Option<f64>>,
    coverage: Vec<u64>,
    out_of_extent: usize,
}

impl HeightGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        if !(spec.resolution > 0.0 && spec.sub_resolution > 0.0) {
            return Err(Error::Config("grid resolutions must be positive".into()));
        }
        let sub = (spec.resolution / spec.sub_resolution).round() as usize;
        if sub == 0 || sub * sub > 64 || (sub as f64 * spec.sub_resolution - spec.resolution).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "resolution {} must be a multiple (at most 8x) of sub-resolution {}",
                spec.resolution, spec.sub_resolution
            )));
        }
        let nx = (spec.extent[0] / spec.resolution).round() as usize;
        let ny = (spec.extent[1] / spec.resolution).round() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!("grid extent {:?} is empty", spec.extent)));
        }
        Ok(Self { spec, nx, ny, sub, height: vec![None; nx * ny], coverage: vec![0; nx * ny], out_of_extent: 0 })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn resolution(&self) -> f64 {
        self.spec.resolution
    }

    /// Row-major index of cell `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let fx = (p[0] - self.spec.origin[0]) / self.spec.resolution;
        let fy = (p[1] - self.spec.origin[1]) / self.spec.resolution;
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.spec.origin[0] + (i as f64 + 0.5) * self.spec.resolution,
            self.spec.origin[1] + (j as f64 + 0.5) * self.spec.resolution,
        ]
    }

    /// Admissible height: `None` if never sensed, `Some(∞)` if only ground
    /// was seen.
    pub fn height(&self, i: usize, j: usize) -> Option<f64> {
        self.height[self.index(i, j)]
    }

    pub fn coverage(&self, i: usize, j: usize) -> f64 {
        self.coverage[self.index(i, j)].count_ones() as f64 / (self.sub * self.sub) as f64
    }

    pub fn out_of_extent(&self) -> usize {
        self.out_of_extent
    }

    pub fn ingest_points(&mut self, points: &[[f64; 3]]) -> IngestStats {
        let mut stats = IngestStats::default();
        for p in points {
            let Some((i, j)) = self.cell_of([p[0], p[1]]) else {
                stats.out_of_extent += 1;
                continue;
            };
            stats.accepted += 1;
            let k = self.index(i, j);
            let si = (((p[0] - self.spec.origin[0]) / self.spec.sub_resolution).floor() as usize)
                .saturating_sub(i * self.sub)
                .min(self.sub - 1);
            let sj = (((p[1] - self.spec.origin[1]) / self.spec.sub_resolution).floor() as usize)
                .saturating_sub(j * self.sub)
                .min(self.sub - 1);
            self.coverage[k] |= 1u64 << (sj * self.sub + si);
            let prev = self.height[k].unwrap_or(f64::INFINITY);
            let h = if p[2] < self.spec.ground_z { f64::INFINITY } else { (p[2] - self.spec.stack_height).max(0.0) };
            self.height[k] = Some(prev.min(h));
        }
        self.out_of_extent += stats.out_of_extent;
        stats
    }

    /// Known low ceilings dominate coverage: a measured height below the
    /// free threshold classifies the cell however little of it was seen.
    pub fn classify(&self, i: usize, j: usize) -> CellClass {
        match self.height(i, j) {
            Some(h) if h < self.spec.obstacle_height => CellClass::Obstacle,
            Some(h) if h < self.spec.free_height => CellClass::HeightConstrained,
            _ if self.coverage(i, j) >= self.spec.coverage_threshold => CellClass::Free,
            _ => CellClass::Unexplored,
        }
    }

    /// Marks a cell as an obstacle directly; used to build test maps.
    pub fn set_height(&mut self, i: usize, j: usize, h: Option<f64>, coverage: f64) {
        let k = self.index(i, j);
        self.height[k] = h;
        let n = ((coverage.clamp(0.0, 1.0)) * (self.sub * self.sub) as f64).round() as u32;
        self.coverage[k] = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    }

    pub fn local_view(&self, robot: [f64; 2], goal: [f64; 2]) -> LocalMapView {
        let d = [goal[0] - robot[0], goal[1] - robot[1]];
        let len = d[0].hypot(d[1]);
        let axis = if len > 1e-9 { [d[0] / len, d[1] / len] } else { [1.0, 0.0] };
        let half_l = 0.5 * self.spec.local_length;
        let half_w = 0.5 * self.spec.local_width;
        let off = (0.5 * len).min(half_l);
        let center = [robot[0] + axis[0] * off, robot[1] + axis[1] * off];
        let mut view = LocalMapView {
            center,
            axis,
            width: self.spec.local_width,
            length: self.spec.local_length,
            obstacles: Vec::new(),
            h_min: self.spec.free_height,
        };
        let reach = half_l.hypot(half_w);
        let lo = [center[0] - reach, center[1] - reach];
        let r_obs = 0.5 * self.spec.resolution * std::f64::consts::SQRT_2;
        let (i0, j0) = self.clamped_cell(lo);
        let (i1, j1) = self.clamped_cell([center[0] + reach, center[1] + reach]);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let c = self.center(i, j);
                if !view.contains(c) {
                    continue;
                }
                match self.classify(i, j) {
                    CellClass::Obstacle => view.obstacles.push([c[0], c[1], r_obs]),
                    CellClass::HeightConstrained => {
                        view.h_min = view.h_min.min(self.height(i, j).unwrap());
                    }
                    _ => {}
                }
            }
        }
        view
    }

    fn clamped_cell(&self, p: [f64; 2]) -> (usize, usize) {
        let f = |v: f64, o: f64, n: usize| (((v - o) / self.spec.resolution).floor().max(0.0) as usize).min(n - 1);
        (f(p[0], self.spec.origin[0], self.nx), f(p[1], self.spec.origin[1], self.ny))
    }

    pub fn to_export(&self) -> GridExport {
        let mut cells = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                cells.push(CellExport {
                    i,
                    j,
                    height: self.height(i, j).filter(|h| h.is_finite()),
                    class: self.classify(i, j),
                    coverage: self.coverage(i, j),
                });
            }
        }
        GridExport { spec: self.spec.clone(), nx: self.nx, ny: self.ny, cells }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_export())?)
    }

    /// Rebuilds a grid from its export; a null height with nonzero coverage
    /// is the ground-only sentinel.
    pub fn from_export(export: &GridExport) -> Result<Self> {
        let mut g = Self::new(export.spec.clone())?;
        if (g.nx, g.ny) != (export.nx, export.ny) {
            return Err(Error::Parse(format!(
                "grid dims {}x{} disagree with spec {}x{}",
                export.nx, export.ny, g.nx, g.ny
            )));
        }
        for c in &export.cells {
            if c.i >= g.nx || c.j >= g.ny {
                return Err(Error::Parse(format!("cell ({}, {}) outside grid", c.i, c.j)));
            }
            let h = match c.height {
                Some(h) => Some(h),
                None if c.coverage > 0.0 => Some(f64::INFINITY),
                None => None,
            };
            g.set_height(c.i, c.j, h, c.coverage);
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: GridExport = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        Self::from_export(&export)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellExport {
    pub i: usize,
    pub j: usize,
    pub height: Option<f64>,
    pub class: CellClass,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExport {
    pub spec: GridSpec,
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<CellExport>,
}

/// Oriented box between the robot and its local goal with the obstacles and
/// lowest admissible height found inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMapView {
    pub center: [f64; 2],
    /// Unit vector along the box length.
    pub axis: [f64; 2],
    pub width: f64,
    pub length: f64,
    /// `(x, y, r_obs)` per obstacle cell.
    pub obstacles: Vec<[f64; 3]>,
    pub h_min: f64,
}

impl LocalMapView {
    /// A view with nothing in it.
    pub fn empty(center: [f64; 2], h_free: f64) -> Self {
        Self { center, axis: [1.0, 0.0], width: 1.2, length: 2.75, obstacles: Vec::new(), h_min: h_free }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let along = d[0] * self.axis[0] + d[1] * self.axis[1];
        let across = -d[0] * self.axis[1] + d[1] * self.axis[0];
        along.abs() <= 0.5 * self.length + 1e-12 && across.abs() <= 0.5 * self.width + 1e-12
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut v = self.clone();
        v.center = [v.center[0] + dx, v.center[1] + dy];
        for o in &mut v.obstacles {
            o[0] += dx;
            o[1] += dy;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_sets_height() {
        let mut g = HeightGrid::new(GridSpec::default()).unwrap();
        g.ingest_points(&[[0.2, 0.2, 0.75]]);
        assert_eq!(g.height(0, 0), Some(0.75));
        g.ingest_points(&[[0.3, 0.1, 0.9]]);
        assert_eq!(g.height(0, 0), Some(0.75));
        assert_eq!(g.classify(0, 0), CellClass::HeightConstrained);
        assert_eq!(g.classify(5, 5), CellClass::Unexplored);
    }

    #[test]
    fn ground_sweep_is_free() {
        let mut g = HeightGrid::new(GridSpec::default()).unwrap();
        let pts: Vec<[f64; 3]> =
            (0..5).flat_map(|a| (0..5).map(move |b| [0.05 + 0.1 * a as f64, 0.05 + 0.1 * b as f64, 0.0])).collect();
        g.ingest_points(&pts);
        assert_eq!(g.height(0, 0), Some(f64::INFINITY));
        assert_eq!(g.coverage(0, 0), 1.0);
        assert_eq!(g.classify(0, 0), CellClass::Free);
        let stats = g.ingest_points(&[[-1.0, 0.0, 1.0], [25.0, 1.0, 1.0]]);
        assert_eq!(stats.out_of_extent, 2);
    }

    #[test]
    fn export_round_trip() {
        let mut g = HeightGrid::new(GridSpec { extent: [2.0, 2.0], ..Default::default() }).unwrap();
        g.ingest_points(&[[0.2, 0.2, 0.75], [1.2, 0.2, 0.0], [1.7, 1.7, 0.3]]);
        let text = g.to_json().unwrap();
        assert!(!text.contains("inf"));
        let back = HeightGrid::from_json(&text).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(back.classify(i, j), g.classify(i, j));
                assert_eq!(back.height(i, j), g.height(i, j));
            }
        }
        let err = HeightGrid::from_json("{\n  \"nx\": 1,\n  oops").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
