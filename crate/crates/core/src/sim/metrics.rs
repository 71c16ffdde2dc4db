//! Safety and performance summary of a run.

use serde::{Deserialize, Serialize};

use super::{CommandRecord, Event, Outcome, ScenarioConfig};
use crate::collocation::SolveStatus;
use crate::grid::{CellClass, HeightGrid};
use crate::vslip::State;

/// Solve-time distribution in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles.
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self { count: v.len(), median: rank(0.5), p90: rank(0.9), max: *v.last().unwrap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub outcome: Outcome,
    pub sim_time: f64,
    pub goal_error: f64,
    /// Minimum signed planar distance to any ground obstacle; `None`
    /// without ground obstacles.
    pub min_clearance: Option<f64>,
    /// Largest `q_z + stack − ceiling`, floored at zero.
    pub max_ceiling_violation: f64,
    /// Largest `q_z − (h − s_h)` over steps spent in height-constrained
    /// cells of the final map, floored at zero.
    pub max_height_violation: f64,
    pub steps_under_constraint: usize,
    pub min_height_under_constraint: Option<f64>,
    pub max_height_after_constraint: Option<f64>,
    pub max_step_displacement: f64,
    pub commands: usize,
    pub non_optimal_commands: usize,
    /// Largest command-set distance over Optimal reactive solves.
    pub max_set_margin: f64,
    /// Optimal commands more than 1e-3 outside their set.
    pub set_violations: usize,
    /// Commands more than 0.1 outside their set, any status.
    pub gross_set_violations: usize,
    pub slopes_used: Vec<i32>,
    pub set_switches: usize,
    pub local_solve: Percentiles,
    pub reactive_solve: Percentiles,
    pub local_failures: usize,
    pub route_failures: usize,
}

pub const SET_TOL: f64 = 1e-3;
pub const GROSS_SET_MARGIN: f64 = 0.1;

pub fn compute_metrics(
    cfg: &ScenarioConfig,
    states: &[(f64, State)],
    commands: &[CommandRecord],
    events: &[Event],
    map: Option<&HeightGrid>,
    outcome: Outcome,
) -> Metrics {
    let gz = cfg.sensor.ground_z;
    let stack = cfg.sensor.stack_height;
    let s_h = cfg.planner.s_h;
    let mut min_clearance = f64::INFINITY;
    let mut max_ceiling = 0.0f64;
    let mut max_height = 0.0f64;
    let mut under = 0usize;
    let mut min_under: Option<f64> = None;
    let mut last_under: Option<usize> = None;
    let mut max_step = 0.0f64;
    for (k, (_, s)) in states.iter().enumerate() {
        let p = [s.q_x, s.q_y];
        min_clearance = min_clearance.min(cfg.world.clearance(p, gz));
        max_ceiling = max_ceiling.max(s.q_z + stack - cfg.world.ceiling(p, gz));
        if let Some((i, j)) = map.and_then(|m| m.cell_of(p)) {
            let m = map.unwrap();
            if m.classify(i, j) == CellClass::HeightConstrained {
                let h = m.height(i, j).unwrap();
                max_height = max_height.max(s.q_z - (h - s_h));
                under += 1;
                min_under = Some(min_under.map_or(s.q_z, |v: f64| v.min(s.q_z)));
                last_under = Some(k);
            }
        }
        if k > 0 {
            let q = &states[k - 1].1;
            max_step = max_step.max((s.q_x - q.q_x).hypot(s.q_y - q.q_y));
        }
    }
    let max_after = last_under.and_then(|k| states[k + 1..].iter().map(|(_, s)| s.q_z).reduce(f64::max));
    let goal_error = states.last().map_or(f64::INFINITY, |(_, s)| (s.q_x - cfg.goal[0]).hypot(s.q_y - cfg.goal[1]));
    let optimal: Vec<&CommandRecord> = commands.iter().filter(|c| c.status == SolveStatus::Optimal).collect();
    let mut slopes: Vec<i32> = commands.iter().map(|c| c.slope).collect();
    let switches = slopes.windows(2).filter(|w| w[0] != w[1]).count();
    slopes.sort_unstable();
    slopes.dedup();
    let local: Vec<f64> = events
        .iter()
        .filter(|e| e.kind == "local_plan")
        .filter_map(|e| e.solve.as_ref().map(|s| s.solve_time))
        .collect();
    Metrics {
        outcome,
        sim_time: states.last().map_or(0.0, |s| s.0),
        goal_error,
        min_clearance: min_clearance.is_finite().then_some(min_clearance),
        max_ceiling_violation: max_ceiling.max(0.0),
        max_height_violation: max_height.max(0.0),
        steps_under_constraint: under,
        min_height_under_constraint: min_under,
        max_height_after_constraint: max_after,
        max_step_displacement: max_step,
        commands: commands.len(),
        non_optimal_commands: commands.len() - optimal.len(),
        max_set_margin: optimal.iter().map(|c| c.margin).fold(0.0, f64::max),
        set_violations: optimal.iter().filter(|c| c.margin > SET_TOL).count(),
        gross_set_violations: commands.iter().filter(|c| c.margin > GROSS_SET_MARGIN).count(),
        slopes_used: slopes,
        set_switches: switches,
        local_solve: Percentiles::of(&local),
        reactive_solve: Percentiles::of(&commands.iter().map(|c| c.solve_time).collect::<Vec<_>>()),
        local_failures: events.iter().filter(|e| e.kind == "local_failed").count(),
        route_failures: events.iter().filter(|e| e.kind == "route_failed").count(),
    }
}
