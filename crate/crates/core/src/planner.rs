//! Local (long preview) and reactive (fast replanning) planners.
//!
//! Both planners solve in a frame anchored at the initial state: its
//! position is the origin and its heading the +x axis. Command-set
//! velocities are therefore sagittal/lateral relative to the robot, and the
//! optimal plan is equivariant under planar translation of the whole scene.

use serde::{Deserialize, Serialize};

use crate::collocation::{
    solve_with, transcribe, Bounds, CostWeights, Obstacle, ProblemSpec, SolveStatus, SolverOptions, Trajectory,
};
use crate::command_set::CommandSet;
use crate::error::Result;
use crate::geometry::{wrap_angle, Polyline};
use crate::grid::LocalMapView;
use crate::vslip::{FootPlacementCoeffs, Foothold, Input, RobotParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub steps: usize,
    pub horizon: f64,
    pub nodes: usize,
    pub period: f64,
    pub apply_height: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSchedule {
    pub local: HorizonSpec,
    pub reactive: HorizonSpec,
    pub lookahead_local: f64,
    pub lookahead_reactive: f64,
}

impl Default for PlannerSchedule {
    fn default() -> Self {
        Self {
            local: HorizonSpec { steps: 6, horizon: 3.0, nodes: 36, period: 1.0, apply_height: true },
            reactive: HorizonSpec { steps: 1, horizon: 0.5, nodes: 6, period: 0.1, apply_height: false },
            lookahead_local: 1.0,
            lookahead_reactive: 0.3,
        }
    }
}

impl PlannerSchedule {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        for (name, h) in [("local", &self.local), ("reactive", &self.reactive)] {
            if !(h.period > 0.0 && h.horizon > 0.0) || h.steps == 0 || h.nodes % h.steps != 0 {
                return Err(Error::Config(format!("{name} schedule {h:?} is inconsistent")));
            }
        }
        if self.reactive.period >= self.local.period {
            return Err(Error::Config("reactive period must be shorter than the local period".into()));
        }
        Ok(())
    }
}

/// Everything the planners need besides the map, goal and command set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub schedule: PlannerSchedule,
    pub weights: CostWeights,
    pub bounds: Bounds,
    pub params: RobotParams,
    pub foot_coeffs: FootPlacementCoeffs,
    pub r_robot: f64,
    pub s_obs: f64,
    pub s_h: f64,
    /// Terminal walking height of the local plan when nothing overhead.
    pub nominal_height: f64,
    /// Turn the barycentric command-set constraints off (ablation only).
    pub enforce_command_set: bool,
    pub solver: SolverOptions,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            schedule: PlannerSchedule::default(),
            weights: CostWeights::default(),
            bounds: Bounds::default(),
            params: RobotParams::default(),
            foot_coeffs: FootPlacementCoeffs::default(),
            r_robot: 0.5,
            s_obs: 0.1,
            s_h: 0.03,
            nominal_height: 1.0,
            enforce_command_set: true,
            solver: SolverOptions::default(),
        }
    }
}

/// Desired gait handed to the walking controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub dq_x_d: f64,
    pub dq_y_d: f64,
    pub q_z_d: f64,
    pub dq_phi_d: f64,
}

impl Command {
    pub fn gait_parameter(&self) -> [f64; 3] {
        [self.dq_x_d, self.dq_y_d, self.q_z_d]
    }

    /// Zero velocities at the given height clamped into the set.
    pub fn stop(height: f64, set: &CommandSet) -> Self {
        let [_, _, [lo, hi]] = set.bounding_box();
        Self { dq_x_d: 0.0, dq_y_d: 0.0, q_z_d: height.clamp(lo, hi), dq_phi_d: 0.0 }
    }
}

/// Rigid planar frame: `origin` and `yaw` of the local x axis in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: [f64; 2],
    pub yaw: f64,
}

impl Frame {
    pub fn at(s: &State) -> Self {
        Self { origin: [s.q_x, s.q_y], yaw: s.q_phi }
    }

    fn rot(&self, v: [f64; 2], sign: f64) -> [f64; 2] {
        let (s, c) = (sign * self.yaw).sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn point_to_local(&self, p: [f64; 2]) -> [f64; 2] {
        self.rot([p[0] - self.origin[0], p[1] - self.origin[1]], -1.0)
    }

    pub fn point_to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.rot(p, 1.0);
        [r[0] + self.origin[0], r[1] + self.origin[1]]
    }

    pub fn vec_to_local(&self, v: [f64; 2]) -> [f64; 2] {
        self.rot(v, -1.0)
    }

    pub fn vec_to_world(&self, v: [f64; 2]) -> [f64; 2] {
        self.rot(v, 1.0)
    }

    pub fn state_to_local(&self, s: &State) -> State {
        let p = self.point_to_local([s.q_x, s.q_y]);
        let v = self.vec_to_local([s.dq_x, s.dq_y]);
        State { q_x: p[0], q_y: p[1], q_phi: s.q_phi - self.yaw, dq_x: v[0], dq_y: v[1], ..*s }
    }

    pub fn state_to_world(&self, s: &State) -> State {
        let p = self.point_to_world([s.q_x, s.q_y]);
        let v = self.vec_to_world([s.dq_x, s.dq_y]);
        State { q_x: p[0], q_y: p[1], q_phi: s.q_phi + self.yaw, dq_x: v[0], dq_y: v[1], ..*s }
    }

    fn input_to(&self, u: &Input, sign: f64) -> Input {
        let a = self.rot([u.u_x, u.u_y], sign);
        Input { u_x: a[0], u_y: a[1], ..*u }
    }

    pub fn trajectory_to_world(&self, t: &mut Trajectory) {
        for s in &mut t.nodes {
            *s = self.state_to_world(s);
        }
        for u in &mut t.inputs {
            *u = self.input_to(u, 1.0);
        }
        for f in &mut t.footholds {
            let p = self.point_to_world([f.x_f, f.y_f]);
            *f = Foothold { x_f: p[0], y_f: p[1], z_f: f.z_f };
        }
    }

    pub fn trajectory_to_local(&self, t: &Trajectory) -> Trajectory {
        let mut out = t.clone();
        for s in &mut out.nodes {
            *s = self.state_to_local(s);
        }
        for u in &mut out.inputs {
            *u = self.input_to(u, -1.0);
        }
        for f in &mut out.footholds {
            let p = self.point_to_local([f.x_f, f.y_f]);
            *f = Foothold { x_f: p[0], y_f: p[1], z_f: f.z_f };
        }
        out
    }
}

fn base_spec(
    h: &HorizonSpec,
    x_init: State,
    x_final: State,
    map: &LocalMapView,
    frame: &Frame,
    cfg: &PlannerConfig,
    set: &CommandSet,
) -> ProblemSpec {
    let mut spec = ProblemSpec::new(h.nodes, h.horizon, h.steps, x_init, x_final);
    spec.obstacles = map
        .obstacles
        .iter()
        .map(|o| {
            let p = frame.point_to_local([o[0], o[1]]);
            Obstacle { x: p[0], y: p[1], r_obs: o[2], s_obs: cfg.s_obs }
        })
        .collect();
    spec.h_min = map.h_min;
    spec.s_h = cfg.s_h;
    spec.weights = cfg.weights;
    spec.bounds = cfg.bounds;
    spec.command_set = set.clone();
    spec.params = cfg.params;
    spec.foot_coeffs = cfg.foot_coeffs;
    spec.r_robot = cfg.r_robot;
    spec.enforce_command_set = cfg.enforce_command_set;
    spec
}

fn solve_in_frame(
    spec: &ProblemSpec,
    frame: &Frame,
    guess: Option<&Trajectory>,
    cfg: &PlannerConfig,
) -> Result<Trajectory> {
    let mut nlp = transcribe(spec)?;
    let local_guess = guess.filter(|g| g.nodes.len() == spec.n + 1).map(|g| frame.trajectory_to_local(g));
    let mut traj = solve_with(&mut nlp, local_guess.as_ref(), &cfg.solver);
    frame.trajectory_to_world(&mut traj);
    Ok(traj)
}

/// Terminal state of the local plan: at the goal, at rest, facing the goal.
pub fn local_target(
    x_init: &State,
    goal: [f64; 2],
    map: &LocalMapView,
    cfg: &PlannerConfig,
    set: &CommandSet,
) -> State {
    let frame = Frame::at(x_init);
    let g = frame.point_to_local(goal);
    let heading = if g[0].hypot(g[1]) > 1e-6 { g[1].atan2(g[0]) } else { 0.0 };
    let [_, _, [lo, hi]] = set.bounding_box();
    let mut height = cfg.nominal_height;
    if cfg.schedule.local.apply_height && map.h_min < cfg.nominal_height {
        height = height.min(map.h_min - cfg.s_h);
    }
    frame.state_to_world(&State::from_array([g[0], g[1], height.clamp(lo, hi), heading, 0.0, 0.0, 0.0, 0.0]))
}

/// Long-preview plan toward `goal`, honouring the map's height limit over
/// the second half of the horizon.
pub fn plan_local(
    x_init: &State,
    goal: [f64; 2],
    map: &LocalMapView,
    cfg: &PlannerConfig,
    set: &CommandSet,
    guess: Option<&Trajectory>,
) -> Result<Trajectory> {
    let frame = Frame::at(x_init);
    let h = &cfg.schedule.local;
    let x_final = frame.state_to_local(&local_target(x_init, goal, map, cfg, set));
    let mut spec = base_spec(h, frame.state_to_local(x_init), x_final, map, &frame, cfg, set);
    spec.apply_height_constraint = h.apply_height && map.h_min < cfg.nominal_height;
    solve_in_frame(&spec, &frame, guess, cfg)
}

/// State `lookahead` metres of arc length ahead of the point of `traj`
/// closest to `robot`, interpolated between nodes.
pub fn select_reactive_target(traj: &Trajectory, robot: [f64; 2], lookahead: f64) -> State {
    let line = Polyline::new(traj.nodes.iter().map(|s| [s.q_x, s.q_y]).collect());
    let here = line.closest(robot);
    if here.s + lookahead >= line.length() {
        return *traj.terminal();
    }
    let st = line.at(here.s + lookahead);
    let a = traj.nodes[st.segment].to_array();
    let b = traj.nodes[st.segment + 1].to_array();
    State::from_array(std::array::from_fn(|k| a[k] + st.t * (b[k] - a[k])))
}

/// Fastest forward speed the set admits at height `z`, zero if none.
pub fn max_forward_speed(set: &CommandSet, z: f64) -> f64 {
    let [[_, hi], _, _] = set.bounding_box();
    if hi <= 0.0 || !set.contains([0.0, 0.0, z], 1e-9) {
        return 0.0;
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        if set.contains([m, 0.0, z], 1e-9) {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Reactive target under a known low ceiling `h_cap`. The height is capped
/// at `h_cap − s_h` so the short horizon starts crouching before the robot
/// is under the ceiling, the lookahead shrinks to a distance the low gait
/// can cover within the reactive horizon, and the planar velocity is scaled
/// until the target gait is in the set. Without a ceiling this is
/// [`select_reactive_target`]. The reactive problem itself carries no
/// height constraint.
pub fn capped_reactive_target(
    traj: &Trajectory,
    robot: [f64; 2],
    h_cap: f64,
    cfg: &PlannerConfig,
    set: &CommandSet,
) -> State {
    let lookahead = cfg.schedule.lookahead_reactive;
    if h_cap >= cfg.nominal_height {
        return select_reactive_target(traj, robot, lookahead);
    }
    let [_, _, [lo, _]] = set.bounding_box();
    let z = (h_cap - cfg.s_h - CAPPED_MARGIN).max(lo);
    let reach = CAPPED_REACH * max_forward_speed(set, z) * cfg.schedule.reactive.horizon;
    let target = select_reactive_target(traj, robot, lookahead.min(reach));
    if z >= target.q_z {
        return target;
    }
    let frame = Frame { origin: [0.0, 0.0], yaw: target.q_phi };
    let v = frame.vec_to_local([target.dq_x, target.dq_y]);
    let inside = |a: f64| set.contains([a * v[0], a * v[1], z], 1e-9);
    let alpha = if inside(1.0) {
        1.0
    } else if !inside(0.0) {
        0.0
    } else {
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..50 {
            let m = 0.5 * (a + b);
            if inside(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let w = frame.vec_to_world([alpha * v[0], alpha * v[1]]);
    State { q_z: z, dq_x: w[0], dq_y: w[1], ..target }
}

/// Membership slack tolerated before a reactive command is projected.
const PROJECT_TOL: f64 = 1e-6;

/// Fraction of the low gait's top speed the capped lookahead assumes.
const CAPPED_REACH: f64 = 0.8;

/// Extra crouch on the capped target. The short horizon with a free
/// terminal input defers descent to its last interval, so following node 1
/// settles slightly above the target height.
const CAPPED_MARGIN: f64 = 0.03;

/// Short-horizon plan toward `target`; the command is read off node 1.
/// Anything but an optimal solve yields a stop command.
pub fn plan_reactive(
    x_init: &State,
    target: &State,
    map: &LocalMapView,
    cfg: &PlannerConfig,
    set: &CommandSet,
    guess: Option<&Trajectory>,
) -> Result<(Trajectory, Command)> {
    let frame = Frame::at(x_init);
    let h = &cfg.schedule.reactive;
    let mut x_final = frame.state_to_local(target);
    x_final.q_phi = wrap_angle(x_final.q_phi);
    let mut spec = base_spec(h, frame.state_to_local(x_init), x_final, map, &frame, cfg, set);
    spec.apply_height_constraint = false;
    let mut traj = solve_in_frame(&spec, &frame, guess, cfg)?;
    let cmd = if traj.status == SolveStatus::Optimal {
        let mut cmd = command_from(&frame.state_to_local(&traj.nodes[1]));
        // Node 1 is pinned by the dynamics to x_0; when the obstacle slack
        // outweighs the set slack it can leave the set, and the walking
        // controller only accepts gaits inside it.
        let gait = cmd.gait_parameter();
        if cfg.enforce_command_set && !set.contains(gait, PROJECT_TOL) {
            let [vx, vy, z] = set.project(gait);
            traj.warnings.push(format!("command projected onto the set from margin {:.3e}", set.margin(gait)));
            cmd = Command { dq_x_d: vx, dq_y_d: vy, q_z_d: z, dq_phi_d: set.clamp_yaw_rate(cmd.dq_phi_d) };
        }
        cmd
    } else {
        Command::stop(x_init.q_z, set)
    };
    Ok((traj, cmd))
}

/// `(dq_x, dq_y, q_z, dq_phi)` of a state already in the robot frame.
pub fn command_from(s: &State) -> Command {
    Command { dq_x_d: s.dq_x, dq_y_d: s.dq_y, q_z_d: s.q_z, dq_phi_d: s.dq_phi }
}

/// Measured planar pose plus feedforward height and velocities from node 1
/// of the previous reactive plan.
pub fn mix_initial_condition(measured: &State, previous: Option<&Trajectory>) -> State {
    match previous.and_then(|t| t.nodes.get(1)) {
        None => *measured,
        Some(ff) => State { q_x: measured.q_x, q_y: measured.q_y, q_phi: measured.q_phi, ..*ff },
    }
}

/// Clamps the gait parameter of `s` (in its own heading frame) to the set's
/// bounding box, then projects it onto the hull, and clamps the yaw rate.
pub fn condition_for_set(s: &State, set: &CommandSet) -> State {
    let frame = Frame { origin: [0.0, 0.0], yaw: s.q_phi };
    let v = frame.vec_to_local([s.dq_x, s.dq_y]);
    let bb = set.bounding_box();
    let clamped = [v[0].clamp(bb[0][0], bb[0][1]), v[1].clamp(bb[1][0], bb[1][1]), s.q_z.clamp(bb[2][0], bb[2][1])];
    let p = if set.contains(clamped, 1e-9) { clamped } else { set.project(clamped) };
    let w = frame.vec_to_world([p[0], p[1]]);
    State { q_z: p[2], dq_x: w[0], dq_y: w[1], dq_phi: set.clamp_yaw_rate(s.dq_phi), ..*s }
}
