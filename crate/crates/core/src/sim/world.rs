//! Scenario geometry, terrain and the synthetic line-of-sight sensor.

use serde::{Deserialize, Serialize};

use crate::geometry::{point_in_polygon, ray_polygon, signed_distance};

/// Prism between `base` and `top` over a footprint. Heights are measured
/// from the local terrain. A base below the ground threshold makes it a
/// ground obstacle, otherwise it hangs overhead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub footprint: Vec<[f64; 2]>,
    pub base: f64,
    pub top: f64,
}

/// Overhead span with an open underside at `clearance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arch {
    pub footprint: Vec<[f64; 2]>,
    pub clearance: f64,
}

/// Piecewise-linear ground elevation along world x; empty means flat.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Terrain {
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
}

impl Terrain {
    pub fn elevation(&self, x: f64) -> f64 {
        if self.xs.is_empty() {
            return 0.0;
        }
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.zs[0];
        }
        if x >= self.xs[n - 1] {
            return self.zs[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
        let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.zs[k] + t * (self.zs[k + 1] - self.zs[k])
    }

    /// dz/dx of the segment containing `x`; the right-hand segment wins at
    /// a breakpoint.
    pub fn gradient(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n < 2 || x < self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
        (self.zs[k + 1] - self.zs[k]) / (self.xs[k + 1] - self.xs[k])
    }

    /// Inclination in degrees met when walking along `yaw` at `(x, _)`.
    pub fn slope_deg(&self, x: f64, yaw: f64) -> f64 {
        (self.gradient(x) * yaw.cos()).atan().to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct World {
    pub blocks: Vec<Block>,
    pub arches: Vec<Arch>,
    pub terrain: Terrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub fov_deg: f64,
    pub range: f64,
    /// Angular spacing of the ray lattice.
    pub ray_step_deg: f64,
    /// Ground sampling interval along each ray.
    pub march_step: f64,
    /// Sensor height above the pelvis.
    pub stack_height: f64,
    /// Points below this height count as ground.
    pub ground_z: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { fov_deg: 87.0, range: 4.0, ray_step_deg: 1.0, march_step: 0.05, stack_height: 0.25, ground_z: 0.15 }
    }
}

impl World {
    fn is_ground(&self, b: &Block, ground_z: f64) -> bool {
        b.base < ground_z
    }

    /// Signed planar distance from `p` to the nearest ground obstacle,
    /// negative inside one. `+∞` when there are none.
    pub fn clearance(&self, p: [f64; 2], ground_z: f64) -> f64 {
        self.blocks
            .iter()
            .filter(|b| self.is_ground(b, ground_z))
            .map(|b| signed_distance(p, &b.footprint))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lowest overhead surface above `p`, `+∞` when open.
    pub fn ceiling(&self, p: [f64; 2], ground_z: f64) -> f64 {
        let arches = self.arches.iter().filter(|a| point_in_polygon(p, &a.footprint)).map(|a| a.clearance);
        let hanging = self
            .blocks
            .iter()
            .filter(|b| !self.is_ground(b, ground_z) && point_in_polygon(p, &b.footprint))
            .map(|b| b.base);
        arches.chain(hanging).fold(f64::INFINITY, f64::min)
    }

    /// Deterministic ray fan from `(x, y)` with heading `yaw`, the sensor at
    /// `height` above the ground. Each ray samples the ground and any open
    /// undersides overhead until it meets a blocking face, where it returns
    /// one face point just inside the block.
    pub fn sense(&self, x: f64, y: f64, yaw: f64, height: f64, sensor: &SensorModel) -> Vec<[f64; 3]> {
        let half = (0.5 * sensor.fov_deg / sensor.ray_step_deg).floor() as i64;
        let blocking: Vec<&Block> = self
            .blocks
            .iter()
            .filter(|b| self.is_ground(b, sensor.ground_z) || (b.base..=b.top).contains(&height))
            .collect();
        let overhead: Vec<(&[[f64; 2]], f64)> = self
            .arches
            .iter()
            .map(|a| (a.footprint.as_slice(), a.clearance))
            .chain(
                self.blocks
                    .iter()
                    .filter(|b| !self.is_ground(b, sensor.ground_z))
                    .map(|b| (b.footprint.as_slice(), b.base)),
            )
            .collect();
        let steps = (sensor.range / sensor.march_step).floor() as usize;
        let mut out = Vec::new();
        for k in -half..=half {
            let a = yaw + (k as f64 * sensor.ray_step_deg).to_radians();
            let dir = [a.cos(), a.sin()];
            let mut hit: Option<(f64, &Block)> = None;
            for b in &blocking {
                if let Some(t) = ray_polygon([x, y], dir, &b.footprint, sensor.range) {
                    if hit.is_none_or(|(h, _)| t < h) {
                        hit = Some((t, b));
                    }
                }
            }
            let t_stop = hit.map_or(sensor.range, |(t, _)| t);
            for s in 1..=steps {
                let t = s as f64 * sensor.march_step;
                if t >= t_stop {
                    break;
                }
                let p = [x + t * dir[0], y + t * dir[1]];
                out.push([p[0], p[1], 0.0]);
                for (poly, z) in &overhead {
                    if *z > sensor.ground_z && point_in_polygon(p, poly) {
                        out.push([p[0], p[1], *z]);
                    }
                }
            }
            if let Some((t, b)) = hit {
                let t = t + 1e-6;
                out.push([x + t * dir[0], y + t * dir[1], b.base.max(sensor.ground_z)]);
            }
        }
        out
    }
}
