//! Built-in scenarios. Every layout is a 4 m wide arena starting at the
//! origin facing +x, with obstacles aligned to the 0.5 m map cells.

use super::{Arch, Block, ScenarioConfig, Terrain, World};
use crate::error::{Error, Result};
use crate::geometry::rect;

const NAMES: [&str; 5] = ["maze", "arch", "arches", "door", "slope"];
const TALL: f64 = 2.0;

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    let world = match name {
        "maze" => maze(),
        "arch" => arch(),
        "arches" => arches(),
        "door" => door(),
        "slope" => slope(),
        _ => return Err(Error::UnknownScenario { name: name.into(), available: NAMES.join(", ") }),
    };
    let (goal, length) = match name {
        "maze" => ([9.0, 0.0], 12.0),
        "arch" => ([8.0, 0.0], 12.0),
        "arches" => ([9.5, 0.0], 12.0),
        "door" => ([9.5, 1.0], 12.0),
        _ => ([13.5, 0.0], 16.0),
    };
    let mut cfg = ScenarioConfig { name: name.into(), goal, world, ..Default::default() };
    cfg.grid.extent = [length, 4.0];
    Ok(cfg)
}

fn ground(x0: f64, y0: f64, x1: f64, y1: f64) -> Block {
    Block { footprint: rect(x0, y0, x1, y1), base: 0.0, top: TALL }
}

fn span(x0: f64, x1: f64, clearance: f64) -> Arch {
    Arch { footprint: rect(x0, -2.0, x1, 2.0), clearance }
}

/// Three 0.5 m × 1.0 m obstacles, the first straight ahead.
fn maze() -> World {
    World {
        blocks: vec![ground(1.5, -0.5, 2.0, 0.5), ground(4.0, 0.5, 4.5, 1.5), ground(6.5, -1.5, 7.0, -0.5)],
        ..Default::default()
    }
}

/// One full-width arch admitting 0.75 m between two ground obstacles.
fn arch() -> World {
    World {
        blocks: vec![ground(1.5, -1.0, 2.0, 0.0), ground(6.5, 0.5, 7.0, 1.5)],
        arches: vec![span(3.5, 5.0, 1.0)],
        ..Default::default()
    }
}

/// Arches admitting 0.85 m and 0.75 m at the two ends, one obstacle between.
fn arches() -> World {
    World {
        blocks: vec![ground(4.5, 0.0, 5.0, 0.5)],
        arches: vec![span(1.5, 3.0, 1.1), span(6.5, 8.0, 1.0)],
        ..Default::default()
    }
}

/// Lab obstacle, then a doorway with a box hanging in front of it that
/// forces a crouch, then an obstacle in the corridor beyond.
fn door() -> World {
    World {
        blocks: vec![
            ground(2.0, -0.5, 2.5, 0.5),
            ground(6.0, -2.0, 6.5, -1.0),
            ground(6.0, 1.0, 6.5, 2.0),
            Block { footprint: rect(5.0, -1.0, 6.0, 1.0), base: 1.05, top: TALL },
            ground(8.0, -1.0, 8.5, -0.5),
        ],
        ..Default::default()
    }
}

/// 4 m incline at 10°, 2 m plateau, 4 m decline, an arch on each ramp and
/// an obstacle on the plateau.
fn slope() -> World {
    let rise = 4.0 * 10f64.to_radians().tan();
    World {
        blocks: vec![ground(6.5, -0.5, 7.0, 0.5)],
        arches: vec![span(3.0, 4.0, 1.1), span(9.0, 10.0, 1.1)],
        terrain: Terrain { xs: vec![-1.0, 1.5, 5.5, 7.5, 11.5, 15.0], zs: vec![0.0, 0.0, rise, rise, 0.0, 0.0] },
    }
}
