//! Deterministic closed-loop simulation of the full navigation stack.

pub mod log;
pub mod metrics;
pub mod plant;
pub mod scenarios;
pub mod world;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::collocation::{SolveStatus, Trajectory};
use crate::command_set::{select_set, SetLibrary};
use crate::error::{Error, Result};
use crate::grid::{GridExport, GridSpec, HeightGrid};
use crate::planner::{
    capped_reactive_target, condition_for_set, mix_initial_condition, plan_local, plan_reactive,
    select_reactive_target, Command, PlannerConfig,
};
use crate::router::{astar, local_goal, GlobalPath, RouteOptions};
use crate::vslip::State;

pub use metrics::{compute_metrics, Metrics, Percentiles};
pub use plant::{plant_step, PlantModel};
pub use scenarios::{builtin, builtin_names};
pub use world::{Arch, Block, SensorModel, Terrain, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub height: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self { x: 0.0, y: 0.0, yaw: 0.0, height: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub start: Pose,
    pub goal: [f64; 2],
    pub goal_tolerance: f64,
    pub goal_speed: f64,
    pub max_time: f64,
    /// Map snapshot cadence in local-planner ticks.
    pub snapshot_every: usize,
    /// Standard deviation of the Gaussian noise on measured velocities.
    pub velocity_noise: f64,
    pub world: World,
    pub sensor: SensorModel,
    pub plant: PlantModel,
    pub grid: GridSpec,
    pub route: RouteOptions,
    pub planner: PlannerConfig,
    pub sets: SetLibrary,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            seed: 0,
            start: Pose::default(),
            goal: [5.0, 0.0],
            goal_tolerance: 0.3,
            goal_speed: 0.05,
            max_time: 120.0,
            snapshot_every: 5,
            velocity_noise: 0.0,
            world: World::default(),
            sensor: SensorModel::default(),
            plant: PlantModel::default(),
            grid: GridSpec { origin: [-1.0, -2.0], extent: [12.0, 4.0], stack_height: 0.25, ..Default::default() },
            route: RouteOptions { inflation: 0.75, inflation_cost: 5.0, ..Default::default() },
            planner: PlannerConfig::default(),
            sets: SetLibrary::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.planner.schedule.validate()?;
        self.sets.validate()?;
        HeightGrid::new(self.grid.clone())?;
        for (what, p) in
            [("local", self.planner.schedule.local.period), ("reactive", self.planner.schedule.reactive.period)]
        {
            let k = p / self.plant.dt;
            if (k - k.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "{what} period {p} is not a multiple of the plant step {}",
                    self.plant.dt
                )));
            }
        }
        if !(self.max_time > 0.0 && self.goal_tolerance > 0.0) {
            return Err(Error::Config("max_time and goal_tolerance must be positive".into()));
        }
        let o = self.grid.origin;
        let e = self.grid.extent;
        let inside = |p: [f64; 2]| p[0] >= o[0] && p[1] >= o[1] && p[0] < o[0] + e[0] && p[1] < o[1] + e[1];
        if !inside(self.goal) {
            return Err(Error::Config(format!("goal {:?} lies outside the grid extent", self.goal)));
        }
        if !inside([self.start.x, self.start.y]) {
            return Err(Error::Config("start lies outside the grid extent".into()));
        }
        if self.world.clearance([self.start.x, self.start.y], self.sensor.ground_z) <= 0.0 {
            return Err(Error::Config("start pose is inside an obstacle".into()));
        }
        Ok(())
    }

    /// Number of integration steps per local and reactive tick.
    pub fn tick_steps(&self) -> (usize, usize) {
        let dt = self.plant.dt;
        let s = &self.planner.schedule;
        ((s.local.period / dt).round() as usize, (s.reactive.period / dt).round() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Collision,
    Timeout,
}

impl Outcome {
    /// Process exit code for the run.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::GoalReached => 0,
            Outcome::Collision => 2,
            Outcome::Timeout => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub t: f64,
    #[serde(flatten)]
    pub command: Command,
    /// Key of the command set active for this solve.
    pub slope: i32,
    /// L∞ distance of the gait parameter to the active set.
    pub margin: f64,
    pub status: SolveStatus,
    pub solve_time: f64,
    pub iterations: usize,
    /// Reactive target position and height.
    pub target: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub status: SolveStatus,
    pub solve_time: f64,
    pub iterations: usize,
    pub max_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveInfo>,
}

impl Event {
    fn new(t: f64, kind: &str, message: impl Into<String>) -> Self {
        Self { t, kind: kind.into(), message: message.into(), solve: None }
    }
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub config: ScenarioConfig,
    pub states: Vec<(f64, State)>,
    pub commands: Vec<CommandRecord>,
    pub events: Vec<Event>,
    pub maps: Vec<(f64, GridExport)>,
    pub final_map: HeightGrid,
    pub outcome: Outcome,
    pub metrics: Metrics,
}

const SLACK_EVENT: f64 = 1e-4;

fn solve_info(t: &Trajectory) -> SolveInfo {
    SolveInfo { status: t.status, solve_time: t.solve_time, iterations: t.iterations, max_slack: t.slacks.max_abs() }
}

/// Runs the closed loop until the goal is reached, a collision happens or
/// time runs out.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog> {
    cfg.validate()?;
    let dt = cfg.plant.dt;
    let (local_every, reactive_every) = cfg.tick_steps();
    let max_steps = (cfg.max_time / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = (cfg.velocity_noise > 0.0).then(|| Normal::new(0.0, cfg.velocity_noise).unwrap());
    let ground_z = cfg.sensor.ground_z;

    let mut grid = HeightGrid::new(cfg.grid.clone())?;
    let mut state = State::standing(cfg.start.x, cfg.start.y, cfg.start.height, cfg.start.yaw);
    let mut states = vec![(0.0, state)];
    let mut commands = Vec::new();
    let mut events = Vec::new();
    let mut maps = Vec::new();
    let mut path: Option<GlobalPath> = None;
    let mut local: Option<Trajectory> = None;
    let mut reactive: Option<Trajectory> = None;
    let mut command = Command { dq_x_d: 0.0, dq_y_d: 0.0, q_z_d: state.q_z, dq_phi_d: 0.0 };
    let mut local_ticks = 0usize;
    let mut outcome = Outcome::Timeout;

    for k in 0..max_steps {
        let t = k as f64 * dt;
        let robot = [state.q_x, state.q_y];
        let slope = cfg.world.terrain.slope_deg(state.q_x, state.q_phi);
        let key = cfg.sets.nearest_key(slope)?;
        let set = select_set(&cfg.sets, slope)?;
        let mut measured = state;
        if let Some(n) = &noise {
            measured.dq_x += n.sample(&mut rng);
            measured.dq_y += n.sample(&mut rng);
        }

        if k % local_every == 0 {
            let pts =
                cfg.world.sense(state.q_x, state.q_y, state.q_phi, state.q_z + cfg.sensor.stack_height, &cfg.sensor);
            grid.ingest_points(&pts);
            match astar(&grid, robot, cfg.goal, &cfg.route) {
                Ok(mut p) => {
                    if let Some(last) = p.waypoints.last_mut() {
                        *last = cfg.goal;
                    }
                    path = Some(p);
                }
                Err(e) => events.push(Event::new(t, "route_failed", e.to_string())),
            }
            if local_ticks.is_multiple_of(cfg.snapshot_every.max(1)) {
                maps.push((t, grid.to_export()));
            }
            local_ticks += 1;
            if let Some(p) = &path {
                let lg = local_goal(p, robot, cfg.planner.schedule.lookahead_local);
                let view = grid.local_view(robot, lg);
                let x0 = condition_for_set(&mix_initial_condition(&measured, reactive.as_ref()), set);
                let traj = plan_local(&x0, lg, &view, &cfg.planner, set, local.as_ref())?;
                let mut ev =
                    Event::new(t, "local_plan", format!("goal ({:.3}, {:.3}), h_min {:.3}", lg[0], lg[1], view.h_min));
                ev.solve = Some(solve_info(&traj));
                events.push(ev);
                for w in &traj.warnings {
                    events.push(Event::new(t, "warning", format!("local: {w}")));
                }
                if traj.status == SolveStatus::Optimal {
                    if traj.slacks.max_abs() > SLACK_EVENT {
                        events.push(Event::new(
                            t,
                            "slack_relaxation",
                            format!("local max slack {:.3e}", traj.slacks.max_abs()),
                        ));
                    }
                    local = Some(traj);
                } else {
                    events.push(Event::new(t, "local_failed", format!("{:?}; keeping the previous plan", traj.status)));
                }
            }
        }

        if k % reactive_every == 0 {
            let x0 = condition_for_set(&mix_initial_condition(&measured, reactive.as_ref()), set);
            match &local {
                Some(lp) => {
                    let plain = select_reactive_target(lp, robot, cfg.planner.schedule.lookahead_reactive);
                    let view = grid.local_view(robot, [plain.q_x, plain.q_y]);
                    let ahead = match &path {
                        Some(p) => {
                            grid.local_view(robot, local_goal(p, robot, cfg.planner.schedule.lookahead_local)).h_min
                        }
                        None => view.h_min,
                    };
                    let target = capped_reactive_target(lp, robot, view.h_min.min(ahead), &cfg.planner, set);
                    let (traj, cmd) = plan_reactive(&x0, &target, &view, &cfg.planner, set, reactive.as_ref())?;
                    command = cmd;
                    for w in &traj.warnings {
                        events.push(Event::new(t, "warning", format!("reactive: {w}")));
                    }
                    if traj.status == SolveStatus::Optimal {
                        if traj.slacks.max_abs() > SLACK_EVENT {
                            events.push(Event::new(
                                t,
                                "slack_relaxation",
                                format!("reactive max slack {:.3e}", traj.slacks.max_abs()),
                            ));
                        }
                    } else {
                        events.push(Event::new(
                            t,
                            "staleness",
                            format!("reactive {:?}; stop command issued", traj.status),
                        ));
                    }
                    commands.push(CommandRecord {
                        t,
                        command: cmd,
                        slope: key,
                        margin: set.margin(cmd.gait_parameter()),
                        status: traj.status,
                        solve_time: traj.solve_time,
                        iterations: traj.iterations,
                        target: [target.q_x, target.q_y, target.q_z],
                    });
                    reactive = (traj.status == SolveStatus::Optimal).then_some(traj);
                }
                None => {
                    command = Command::stop(state.q_z, set);
                    events.push(Event::new(t, "staleness", "no local plan yet; stop command issued"));
                }
            }
        }

        state = plant_step(&state, &command, &cfg.plant, dt);
        let t_next = (k + 1) as f64 * dt;
        states.push((t_next, state));
        let clearance = cfg.world.clearance([state.q_x, state.q_y], ground_z);
        if clearance <= 0.0 {
            events.push(Event::new(t_next, "collision", format!("clearance {clearance:.4}")));
            outcome = Outcome::Collision;
            break;
        }
        let err = (state.q_x - cfg.goal[0]).hypot(state.q_y - cfg.goal[1]);
        if err <= cfg.goal_tolerance && state.planar_speed() < cfg.goal_speed {
            events.push(Event::new(t_next, "goal_reached", format!("goal error {err:.4}")));
            outcome = Outcome::GoalReached;
            break;
        }
    }
    if outcome == Outcome::Timeout {
        let t_end = states.last().unwrap().0;
        events.push(Event::new(t_end, "timeout", format!("time cap {} s reached", cfg.max_time)));
    }
    let metrics = compute_metrics(cfg, &states, &commands, &events, Some(&grid), outcome);
    Ok(RunLog { config: cfg.clone(), states, commands, events, maps, final_map: grid, outcome, metrics })
}
