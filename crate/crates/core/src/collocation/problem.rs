//! Transcription of the walking trajectory problem into an NLP.
//!
//! Decision vector, node-major:
//!
//! ```text
//! [x_0 u_0 λ_0 δc_0] [x_1 u_1 λ_1 δc_1] ... [x_N u_N λ_N δc_N] δ_final δ_obs
//! ```
//!
//! Equality rows: initial state, trapezoidal defects, convex-combination
//! rows, terminal state. Inequality rows: leg length and obstacle keep-out.
//! Height and box limits are variable bounds.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::ipm::{InteriorPoint, IpmOptions, IpmStatus, KktOrder, KktSlot, NlpFunctions};
use crate::command_set::CommandSet;
use crate::error::{Error, Result};
use crate::vslip::{
    accel_position_hessian, accel_position_jacobian, dynamics_raw, foot_placement_raw, idx, FootPlacementCoeffs,
    Foothold, Input, RobotParams, State, INPUT_DIM, STATE_DIM,
};

/// Circular obstacle; the keep-out radius is `r_obs + r_robot + s_obs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub r_obs: f64,
    #[serde(default = "default_s_obs")]
    pub s_obs: f64,
}

fn default_s_obs() -> f64 {
    0.1
}

impl Obstacle {
    pub fn keep_out_radius(&self, r_robot: f64) -> f64 {
        self.r_obs + r_robot + self.s_obs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub q: [f64; STATE_DIM],
    pub dq: [f64; STATE_DIM],
    pub r: [f64; INPUT_DIM],
    pub d_cfeas: f64,
    pub d_obs: f64,
    pub d_final: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            q: [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            dq: [0.5; STATE_DIM],
            r: [0.1; INPUT_DIM],
            d_cfeas: 1e6,
            d_obs: 1e10,
            d_final: 1e4,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = self.q.iter().chain(&self.dq).chain(&self.r).chain([&self.d_cfeas, &self.d_obs, &self.d_final]);
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Construction("cost weights must be finite and non-negative".into()));
        }
        let biggest = self.q.iter().chain(&self.dq).chain(&self.r).fold(0.0f64, |m, v| m.max(*v));
        for (name, d) in [("d_cfeas", self.d_cfeas), ("d_obs", self.d_obs), ("d_final", self.d_final)] {
            if d < 1e3 * biggest {
                return Err(Error::Construction(format!(
                    "slack weight {name} = {d} is below 1e3 × the largest tracking weight"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds {
    /// Symmetric limit on every input channel.
    pub input_max: f64,
    pub dq_z_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { input_max: 20.0, dq_z_max: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Number of intervals; there are `n + 1` nodes.
    pub n: usize,
    /// Horizon in seconds.
    pub horizon: f64,
    pub steps: usize,
    pub x_init: State,
    pub x_final: State,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
    #[serde(default = "default_s_h")]
    pub s_h: f64,
    #[serde(default)]
    pub apply_height_constraint: bool,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default = "CommandSet::default_flat")]
    pub command_set: CommandSet,
    #[serde(default)]
    pub params: RobotParams,
    #[serde(default)]
    pub foot_coeffs: FootPlacementCoeffs,
    #[serde(default = "default_r_robot")]
    pub r_robot: f64,
    /// Adds the convex-combination block. Disabling it leaves only the
    /// bounding box of the command set.
    #[serde(default = "default_true")]
    pub enforce_command_set: bool,
}

fn default_h_min() -> f64 {
    1.0
}
fn default_s_h() -> f64 {
    0.03
}
fn default_r_robot() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

impl ProblemSpec {
    pub fn new(n: usize, horizon: f64, steps: usize, x_init: State, x_final: State) -> Self {
        Self {
            n,
            horizon,
            steps,
            x_init,
            x_final,
            obstacles: Vec::new(),
            h_min: default_h_min(),
            s_h: default_s_h(),
            apply_height_constraint: false,
            weights: CostWeights::default(),
            bounds: Bounds::default(),
            command_set: CommandSet::default_flat(),
            params: RobotParams::default(),
            foot_coeffs: FootPlacementCoeffs::default(),
            r_robot: default_r_robot(),
            enforce_command_set: true,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    /// First node subject to the height limit.
    pub fn height_start(&self) -> usize {
        self.n / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.steps == 0 || !self.n.is_multiple_of(self.steps) {
            return Err(Error::Construction(format!(
                "node count {} must be a positive multiple of steps {}",
                self.n, self.steps
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Construction(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !self.x_init.to_array().iter().chain(&self.x_final.to_array()).all(|v| v.is_finite()) {
            return Err(Error::Construction("initial and final states must be finite".into()));
        }
        if !(self.r_robot >= 0.0) || !(self.s_h >= 0.0) {
            return Err(Error::Construction("margins must be non-negative".into()));
        }
        for o in &self.obstacles {
            if !(o.r_obs >= 0.0 && o.s_obs >= 0.0) || !o.x.is_finite() || !o.y.is_finite() {
                return Err(Error::Construction(format!("bad obstacle {o:?}")));
            }
            if o.keep_out_radius(self.r_robot) <= 0.0 {
                return Err(Error::Construction("obstacle keep-out radius must be positive".into()));
            }
        }
        if !(self.bounds.input_max > 0.0 && self.bounds.dq_z_max > 0.0) {
            return Err(Error::Construction("bounds must be positive".into()));
        }
        self.weights.validate()?;
        self.params.validate()?;
        self.command_set.validate()
    }

    /// Whether the height limit contradicts the lowest admissible walking
    /// height of the command set.
    pub fn has_crossed_bounds(&self) -> bool {
        self.apply_height_constraint && self.h_min - self.s_h < self.command_set.bounding_box()[2][0] - 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slacks {
    pub cfeas: Vec<f64>,
    pub obs: Vec<f64>,
    pub terminal: [f64; STATE_DIM],
}

impl Slacks {
    pub fn max_abs(&self) -> f64 {
        self.cfeas.iter().chain(&self.obs).chain(&self.terminal).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub nodes: Vec<State>,
    pub inputs: Vec<Input>,
    pub footholds: Vec<Foothold>,
    /// Convex-combination weights per node (empty when the block is off).
    pub weights: Vec<Vec<f64>>,
    pub slacks: Slacks,
    pub status: SolveStatus,
    pub solve_time: f64,
    pub objective: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl Trajectory {
    /// A trajectory with no nodes, to be filled in by hand.
    pub fn empty(dt: f64) -> Self {
        Self {
            dt,
            nodes: Vec::new(),
            inputs: Vec::new(),
            footholds: Vec::new(),
            weights: Vec::new(),
            slacks: Slacks { cfeas: Vec::new(), obs: Vec::new(), terminal: [0.0; STATE_DIM] },
            status: SolveStatus::Optimal,
            solve_time: 0.0,
            objective: 0.0,
            iterations: 0,
            warnings: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn terminal(&self) -> &State {
        self.nodes.last().expect("trajectory has nodes")
    }
}

/// Cost of a trajectory under `weights`.
pub fn evaluate_cost(traj: &Trajectory, weights: &CostWeights) -> f64 {
    let n = traj.n();
    let mut j = 0.0;
    for i in 1..n {
        let x = traj.nodes[i].to_array();
        let xn = traj.nodes[i + 1].to_array();
        let u = traj.inputs[i].to_array();
        for k in 0..STATE_DIM {
            j += weights.q[k] * x[k] * x[k];
            let d = xn[k] - x[k];
            j += weights.dq[k] * d * d;
        }
        for k in 0..INPUT_DIM {
            j += weights.r[k] * u[k] * u[k];
        }
    }
    j += weights.d_cfeas * traj.slacks.cfeas.iter().map(|v| v * v).sum::<f64>();
    j += weights.d_obs * traj.slacks.obs.iter().map(|v| v * v).sum::<f64>();
    j += weights.d_final * traj.slacks.terminal.iter().map(|v| v * v).sum::<f64>();
    j
}

/// The transcribed problem. Implements [`NlpFunctions`] for the solver.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    pub spec: ProblemSpec,
    pub footholds: Vec<Foothold>,
    nv_weights: usize,
    block: usize,
    leg_nodes: Vec<usize>,
    obs_rows: Vec<(usize, usize)>,
    /// Keep-out radius per obstacle, shrunk when the initial state is inside.
    radii: Vec<f64>,
    warnings: Vec<String>,
    vertices: Vec<[f64; 3]>,
}

/// Gait-parameter components `(dq_x, dq_y, q_z)` as state indices.
const GAIT_IDX: [usize; 3] = [idx::DQX, idx::DQY, idx::QZ];

pub fn transcribe(spec: &ProblemSpec) -> Result<NlpProblem> {
    spec.validate()?;
    let n = spec.n;
    let enforce = spec.enforce_command_set;
    let s = if enforce { spec.command_set.vertices.len() } else { 0 };
    let block = STATE_DIM + INPUT_DIM + s + usize::from(enforce);
    let mut warnings = Vec::new();

    let mut footholds = vec![foot_placement_raw(&spec.x_init.to_array(), &spec.foot_coeffs); spec.steps + 1];
    let m = n / spec.steps;
    for k in 1..=spec.steps {
        let frac = (k * m) as f64 / n as f64;
        let xi: Vec<f64> =
            spec.x_init.to_array().iter().zip(spec.x_final.to_array()).map(|(a, b)| a + (b - a) * frac).collect();
        footholds[k] = foot_placement_raw(&xi, &spec.foot_coeffs);
    }

    let x0 = spec.x_init.to_array();
    let mut leg_nodes = Vec::with_capacity(n + 1);
    let l0_ok = {
        let f = footholds[0];
        let d = [x0[0] - f.x_f, x0[1] - f.y_f, x0[2] - f.z_f];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= spec.params.l0 * spec.params.l0
    };
    if l0_ok {
        leg_nodes.push(0);
    } else {
        warnings.push("initial state violates the leg-length limit; node-0 leg row dropped".to_string());
    }
    leg_nodes.extend(1..=n);

    // An initial state inside a keep-out region cannot be moved, so that
    // obstacle's node-0 row is dropped and its radius shrunk to the current
    // l4 distance: later nodes may not get any closer.
    let mut radii = Vec::with_capacity(spec.obstacles.len());
    let mut inside = Vec::with_capacity(spec.obstacles.len());
    for (j, o) in spec.obstacles.iter().enumerate() {
        let r = o.keep_out_radius(spec.r_robot);
        let v = obstacle_value(&x0, o, r);
        if v < 0.0 {
            let shrunk = r * (v + 1.0).max(0.0).powf(0.25) * (1.0 - 1e-3);
            warnings.push(format!(
                "initial state inside keep-out of obstacle {j}; node-0 row dropped, radius {r:.3} -> {shrunk:.3}"
            ));
            radii.push(shrunk.max(1e-3 * r));
        } else {
            radii.push(r);
        }
        inside.push(v < 0.0);
    }
    let mut obs_rows = Vec::new();
    for i in 0..=n {
        for j in 0..spec.obstacles.len() {
            if i == 0 && inside[j] {
                continue;
            }
            obs_rows.push((i, j));
        }
    }

    Ok(NlpProblem {
        spec: spec.clone(),
        footholds,
        nv_weights: s,
        block,
        leg_nodes,
        obs_rows,
        radii,
        warnings,
        vertices: if enforce { spec.command_set.vertices.clone() } else { Vec::new() },
    })
}

/// `(Δx/r)⁴ + (Δy/r)⁴ − 1` without the slack.
fn obstacle_value(x: &[f64], o: &Obstacle, r: f64) -> f64 {
    let ax = (x[idx::QX] - o.x) / r;
    let ay = (x[idx::QY] - o.y) / r;
    ax.powi(4) + ay.powi(4) - 1.0
}

/// Sparse first derivatives at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
    pub objective_gradient: Vec<f64>,
}

impl NlpProblem {
    pub fn num_nodes(&self) -> usize {
        self.spec.n + 1
    }

    pub fn num_weights_per_node(&self) -> usize {
        self.nv_weights
    }

    pub fn num_obstacle_rows(&self) -> usize {
        self.obs_rows.len()
    }

    pub fn num_obstacle_slacks(&self) -> usize {
        self.spec.obstacles.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn x(&self, i: usize, k: usize) -> usize {
        i * self.block + k
    }
    pub fn u(&self, i: usize, k: usize) -> usize {
        i * self.block + STATE_DIM + k
    }
    pub fn lambda(&self, i: usize, j: usize) -> usize {
        i * self.block + STATE_DIM + INPUT_DIM + j
    }
    pub fn cfeas(&self, i: usize) -> usize {
        i * self.block + STATE_DIM + INPUT_DIM + self.nv_weights
    }
    pub fn terminal_slack(&self, k: usize) -> usize {
        self.num_nodes() * self.block + k
    }
    pub fn obstacle_slack(&self, j: usize) -> usize {
        self.num_nodes() * self.block + STATE_DIM + j
    }

    fn enforce(&self) -> bool {
        self.spec.enforce_command_set
    }

    fn row_defect(&self, i: usize, k: usize) -> usize {
        STATE_DIM + i * STATE_DIM + k
    }
    fn row_bary(&self, i: usize, k: usize) -> usize {
        STATE_DIM * (self.spec.n + 1) + i * 4 + k
    }
    fn row_terminal(&self, k: usize) -> usize {
        let bary = if self.enforce() { 4 * self.num_nodes() } else { 0 };
        STATE_DIM * (self.spec.n + 1) + bary + k
    }
    fn row_leg(&self, q: usize) -> usize {
        self.num_eq() + q
    }
    fn row_obs(&self, q: usize) -> usize {
        self.num_eq() + self.leg_nodes.len() + q
    }

    fn interval_foot(&self, i: usize) -> &Foothold {
        &self.footholds[i / (self.spec.n / self.spec.steps)]
    }

    fn node_foot(&self, i: usize) -> &Foothold {
        let m = self.spec.n / self.spec.steps;
        &self.footholds[(i / m).min(self.spec.steps - 1)]
    }

    fn state_slice<'b>(&self, z: &'b [f64], i: usize) -> &'b [f64] {
        &z[self.x(i, 0)..self.x(i, 0) + STATE_DIM]
    }

    fn input_slice<'b>(&self, z: &'b [f64], i: usize) -> &'b [f64] {
        &z[self.u(i, 0)..self.u(i, 0) + INPUT_DIM]
    }

    /// Emits every Jacobian entry in a fixed order, independent of `z`.
    fn for_each_jacobian(&self, z: &[f64], mut emit: impl FnMut(usize, usize, f64)) {
        let n = self.spec.n;
        let h = self.spec.dt();
        let hh = 0.5 * h;
        let params = &self.spec.params;
        for k in 0..STATE_DIM {
            emit(k, self.x(0, k), 1.0);
        }
        for i in 0..n {
            let foot = self.interval_foot(i);
            let ja = accel_position_jacobian(self.state_slice(z, i), foot, params);
            let jb = accel_position_jacobian(self.state_slice(z, i + 1), foot, params);
            for k in 0..STATE_DIM {
                let r = self.row_defect(i, k);
                emit(r, self.x(i, k), -1.0);
                emit(r, self.x(i + 1, k), 1.0);
                match k {
                    0..=3 => {
                        emit(r, self.x(i, k + 4), -hh);
                        emit(r, self.x(i + 1, k + 4), -hh);
                    }
                    4..=6 => {
                        let a = k - 4;
                        for j in 0..3 {
                            emit(r, self.x(i, j), -hh * ja[a][j]);
                            emit(r, self.x(i + 1, j), -hh * jb[a][j]);
                        }
                        emit(r, self.u(i, a), -hh);
                        emit(r, self.u(i + 1, a), -hh);
                    }
                    _ => {
                        emit(r, self.u(i, 3), -hh);
                        emit(r, self.u(i + 1, 3), -hh);
                    }
                }
            }
        }
        if self.enforce() {
            for i in 0..=n {
                for (k, &gi) in GAIT_IDX.iter().enumerate() {
                    let r = self.row_bary(i, k);
                    emit(r, self.x(i, gi), 1.0);
                    for (j, v) in self.vertices.iter().enumerate() {
                        emit(r, self.lambda(i, j), -v[k]);
                    }
                }
                let r = self.row_bary(i, 3);
                for j in 0..self.nv_weights {
                    emit(r, self.lambda(i, j), 1.0);
                }
                emit(r, self.cfeas(i), -1.0);
            }
        }
        for k in 0..STATE_DIM {
            let r = self.row_terminal(k);
            emit(r, self.x(n, k), 1.0);
            emit(r, self.terminal_slack(k), -1.0);
        }
        for (q, &i) in self.leg_nodes.iter().enumerate() {
            let f = self.node_foot(i);
            let x = self.state_slice(z, i);
            let d = [x[0] - f.x_f, x[1] - f.y_f, x[2] - f.z_f];
            for j in 0..3 {
                emit(self.row_leg(q), self.x(i, j), -2.0 * d[j]);
            }
        }
        for (q, &(i, j)) in self.obs_rows.iter().enumerate() {
            let o = &self.spec.obstacles[j];
            let x = self.state_slice(z, i);
            let r4 = self.radii[j].powi(4);
            let row = self.row_obs(q);
            emit(row, self.x(i, idx::QX), 4.0 * (x[0] - o.x).powi(3) / r4);
            emit(row, self.x(i, idx::QY), 4.0 * (x[1] - o.y).powi(3) / r4);
            emit(row, self.obstacle_slack(j), 1.0);
        }
    }

    /// Emits the lower triangle of `obj_factor·∇²f + Σ y_r ∇²c_r` in a
    /// fixed order; entries may repeat and are summed.
    fn for_each_hessian(&self, z: &[f64], of: f64, y: &[f64], mut emit: impl FnMut(usize, usize, f64)) {
        let n = self.spec.n;
        let w = &self.spec.weights;
        let hh = 0.5 * self.spec.dt();
        let params = &self.spec.params;
        // Per-node position block, accumulated from dynamics, leg and obstacle terms.
        let mut pos = vec![[[0.0; 3]; 3]; n + 1];
        for i in 0..n {
            let foot = self.interval_foot(i);
            for node in [i, i + 1] {
                let ha = accel_position_hessian(self.state_slice(z, node), foot, params);
                for a in 0..3 {
                    let yr = y[self.row_defect(i, 4 + a)];
                    if yr == 0.0 {
                        continue;
                    }
                    for p in 0..3 {
                        for q in 0..3 {
                            pos[node][p][q] -= hh * yr * ha[a][p][q];
                        }
                    }
                }
            }
        }
        for (q, &i) in self.leg_nodes.iter().enumerate() {
            let yr = y[self.row_leg(q)];
            for p in 0..3 {
                pos[i][p][p] -= 2.0 * yr;
            }
        }
        for (q, &(i, j)) in self.obs_rows.iter().enumerate() {
            let o = &self.spec.obstacles[j];
            let r4 = self.radii[j].powi(4);
            let x = self.state_slice(z, i);
            let yr = y[self.row_obs(q)];
            pos[i][0][0] += yr * 12.0 * (x[0] - o.x).powi(2) / r4;
            pos[i][1][1] += yr * 12.0 * (x[1] - o.y).powi(2) / r4;
        }
        for i in 0..=n {
            let interior = i >= 1 && i < n;
            for k in 0..STATE_DIM {
                let mut d = 0.0;
                if interior {
                    d += 2.0 * w.q[k];
                }
                // Smoothing pairs (i, i+1) for i in 1..n.
                if interior {
                    d += 2.0 * w.dq[k];
                }
                if i >= 2 {
                    d += 2.0 * w.dq[k];
                }
                d *= of;
                if k < 3 {
                    d += pos[i][k][k];
                }
                emit(self.x(i, k), self.x(i, k), d);
            }
            for p in 1..3 {
                for q in 0..p {
                    emit(self.x(i, p), self.x(i, q), pos[i][p][q]);
                }
            }
            if i >= 2 {
                for k in 0..STATE_DIM {
                    emit(self.x(i, k), self.x(i - 1, k), -2.0 * of * w.dq[k]);
                }
            }
            for k in 0..INPUT_DIM {
                emit(self.u(i, k), self.u(i, k), if interior { 2.0 * of * w.r[k] } else { 0.0 });
            }
            if self.enforce() {
                emit(self.cfeas(i), self.cfeas(i), 2.0 * of * w.d_cfeas);
            }
        }
        for k in 0..STATE_DIM {
            emit(self.terminal_slack(k), self.terminal_slack(k), 2.0 * of * w.d_final);
        }
        for j in 0..self.spec.obstacles.len() {
            emit(self.obstacle_slack(j), self.obstacle_slack(j), 2.0 * of * w.d_obs);
        }
    }

    /// Analytic first derivatives of every constraint row and the objective.
    pub fn jacobians(&self, z: &[f64]) -> SparseJacobian {
        let mut out =
            SparseJacobian { rows: vec![], cols: vec![], values: vec![], objective_gradient: vec![0.0; z.len()] };
        self.for_each_jacobian(z, |r, c, v| {
            out.rows.push(r);
            out.cols.push(c);
            out.values.push(v);
        });
        self.gradient(z, &mut out.objective_gradient);
        out
    }

    /// Linear interpolation between the initial and final states with zero
    /// inputs and slacks; convex weights come from the hull projection.
    pub fn default_guess(&self) -> Vec<f64> {
        let n = self.spec.n;
        let a = self.spec.x_init.to_array();
        let b = self.spec.x_final.to_array();
        let mut z = vec![0.0; self.num_vars()];
        for i in 0..=n {
            let t = i as f64 / n as f64;
            for k in 0..STATE_DIM {
                z[self.x(i, k)] = a[k] + (b[k] - a[k]) * t;
            }
        }
        self.fill_weights(&mut z);
        z
    }

    fn fill_weights(&self, z: &mut [f64]) {
        if !self.enforce() {
            return;
        }
        for i in 0..=self.spec.n {
            let p = GAIT_IDX.map(|k| z[self.x(i, k)]);
            let h = self.spec.command_set.hull_distance(p);
            for (j, w) in h.weights.iter().enumerate() {
                z[self.lambda(i, j)] = *w;
            }
        }
    }

    pub fn guess_from(&self, traj: &Trajectory) -> Vec<f64> {
        let mut z = self.default_guess();
        if traj.nodes.len() != self.num_nodes() {
            return z;
        }
        for i in 0..=self.spec.n {
            let x = traj.nodes[i].to_array();
            let u = traj.inputs[i].to_array();
            for k in 0..STATE_DIM {
                z[self.x(i, k)] = x[k];
            }
            for k in 0..INPUT_DIM {
                z[self.u(i, k)] = u[k];
            }
        }
        self.fill_weights(&mut z);
        for k in 0..STATE_DIM {
            z[self.terminal_slack(k)] = traj.slacks.terminal[k];
        }
        z
    }

    pub fn extract(&self, z: &[f64], status: SolveStatus, solve_time: f64, iterations: usize) -> Trajectory {
        let n = self.spec.n;
        let mut nodes: Vec<State> = (0..=n)
            .map(|i| {
                let mut a = [0.0; STATE_DIM];
                a.copy_from_slice(self.state_slice(z, i));
                State::from_array(a)
            })
            .collect();
        nodes[0] = self.spec.x_init;
        let inputs = (0..=n)
            .map(|i| {
                let mut a = [0.0; INPUT_DIM];
                a.copy_from_slice(self.input_slice(z, i));
                Input::from_array(a)
            })
            .collect();
        let weights = if self.enforce() {
            (0..=n).map(|i| (0..self.nv_weights).map(|j| z[self.lambda(i, j)]).collect()).collect()
        } else {
            Vec::new()
        };
        let mut terminal = [0.0; STATE_DIM];
        for (k, t) in terminal.iter_mut().enumerate() {
            *t = z[self.terminal_slack(k)];
        }
        let slacks = Slacks {
            cfeas: if self.enforce() { (0..=n).map(|i| z[self.cfeas(i)]).collect() } else { Vec::new() },
            obs: (0..self.spec.obstacles.len()).map(|j| z[self.obstacle_slack(j)]).collect(),
            terminal,
        };
        let mut traj = Trajectory {
            dt: self.spec.dt(),
            nodes,
            inputs,
            footholds: self.footholds.clone(),
            weights,
            slacks,
            status,
            solve_time,
            objective: 0.0,
            iterations,
            warnings: self.warnings.clone(),
        };
        traj.objective = evaluate_cost(&traj, &self.spec.weights);
        traj
    }
}

impl NlpFunctions for NlpProblem {
    fn num_vars(&self) -> usize {
        self.num_nodes() * self.block + STATE_DIM + self.spec.obstacles.len()
    }

    fn num_eq(&self) -> usize {
        let bary = if self.enforce() { 4 * self.num_nodes() } else { 0 };
        STATE_DIM * (self.spec.n + 1) + bary + STATE_DIM
    }

    fn num_ineq(&self) -> usize {
        self.leg_nodes.len() + self.obs_rows.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let nv = self.num_vars();
        let mut lo = vec![f64::NEG_INFINITY; nv];
        let mut hi = vec![f64::INFINITY; nv];
        let bb = self.spec.command_set.bounding_box();
        let yaw = self.spec.command_set.yaw_rate_bounds;
        let n = self.spec.n;
        for i in 0..=n {
            if i > 0 {
                lo[self.x(i, idx::QZ)] = bb[2][0];
                hi[self.x(i, idx::QZ)] = bb[2][1];
                if self.spec.apply_height_constraint && i >= self.spec.height_start() {
                    // A degenerate interval would pin the variable; keep a sliver.
                    let cap = (self.spec.h_min - self.spec.s_h).max(bb[2][0] + 1e-4);
                    hi[self.x(i, idx::QZ)] = hi[self.x(i, idx::QZ)].min(cap);
                }
                lo[self.x(i, idx::DQX)] = bb[0][0];
                hi[self.x(i, idx::DQX)] = bb[0][1];
                lo[self.x(i, idx::DQY)] = bb[1][0];
                hi[self.x(i, idx::DQY)] = bb[1][1];
                lo[self.x(i, idx::DQZ)] = -self.spec.bounds.dq_z_max;
                hi[self.x(i, idx::DQZ)] = self.spec.bounds.dq_z_max;
                lo[self.x(i, idx::DQPHI)] = yaw[0];
                hi[self.x(i, idx::DQPHI)] = yaw[1];
            }
            for k in 0..INPUT_DIM {
                lo[self.u(i, k)] = -self.spec.bounds.input_max;
                hi[self.u(i, k)] = self.spec.bounds.input_max;
            }
            if self.enforce() {
                for j in 0..self.nv_weights {
                    lo[self.lambda(i, j)] = 0.0;
                }
                lo[self.cfeas(i)] = 0.0;
            }
        }
        for j in 0..self.spec.obstacles.len() {
            lo[self.obstacle_slack(j)] = 0.0;
        }
        (lo, hi)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let n = self.spec.n;
        let w = &self.spec.weights;
        let mut j = 0.0;
        for i in 1..n {
            let x = self.state_slice(z, i);
            let xn = self.state_slice(z, i + 1);
            let u = self.input_slice(z, i);
            for k in 0..STATE_DIM {
                let d = xn[k] - x[k];
                j += w.q[k] * x[k] * x[k] + w.dq[k] * d * d;
            }
            for k in 0..INPUT_DIM {
                j += w.r[k] * u[k] * u[k];
            }
        }
        if self.enforce() {
            j += w.d_cfeas * (0..=n).map(|i| z[self.cfeas(i)].powi(2)).sum::<f64>();
        }
        j += w.d_final * (0..STATE_DIM).map(|k| z[self.terminal_slack(k)].powi(2)).sum::<f64>();
        j += w.d_obs * (0..self.spec.obstacles.len()).map(|k| z[self.obstacle_slack(k)].powi(2)).sum::<f64>();
        j
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        g.fill(0.0);
        let n = self.spec.n;
        let w = &self.spec.weights;
        for i in 1..n {
            for k in 0..STATE_DIM {
                let x = z[self.x(i, k)];
                let d = z[self.x(i + 1, k)] - x;
                g[self.x(i, k)] += 2.0 * w.q[k] * x - 2.0 * w.dq[k] * d;
                g[self.x(i + 1, k)] += 2.0 * w.dq[k] * d;
            }
            for k in 0..INPUT_DIM {
                g[self.u(i, k)] += 2.0 * w.r[k] * z[self.u(i, k)];
            }
        }
        if self.enforce() {
            for i in 0..=n {
                g[self.cfeas(i)] = 2.0 * w.d_cfeas * z[self.cfeas(i)];
            }
        }
        for k in 0..STATE_DIM {
            g[self.terminal_slack(k)] = 2.0 * w.d_final * z[self.terminal_slack(k)];
        }
        for j in 0..self.spec.obstacles.len() {
            g[self.obstacle_slack(j)] = 2.0 * w.d_obs * z[self.obstacle_slack(j)];
        }
    }

    fn constraints(&self, z: &[f64], c: &mut [f64]) {
        let n = self.spec.n;
        let h = self.spec.dt();
        let params = &self.spec.params;
        let xi = self.spec.x_init.to_array();
        for k in 0..STATE_DIM {
            c[k] = z[self.x(0, k)] - xi[k];
        }
        for i in 0..n {
            let foot = self.interval_foot(i);
            let xa = self.state_slice(z, i);
            let xb = self.state_slice(z, i + 1);
            let fa = dynamics_raw(xa, self.input_slice(z, i), foot, params);
            let fb = dynamics_raw(xb, self.input_slice(z, i + 1), foot, params);
            for k in 0..STATE_DIM {
                c[self.row_defect(i, k)] = xb[k] - xa[k] - 0.5 * h * (fa[k] + fb[k]);
            }
        }
        if self.enforce() {
            for i in 0..=n {
                let mut r = [0.0; 4];
                for (k, &gi) in GAIT_IDX.iter().enumerate() {
                    r[k] = z[self.x(i, gi)];
                }
                r[3] = -1.0 - z[self.cfeas(i)];
                for (j, v) in self.vertices.iter().enumerate() {
                    let l = z[self.lambda(i, j)];
                    for k in 0..3 {
                        r[k] -= l * v[k];
                    }
                    r[3] += l;
                }
                for k in 0..4 {
                    c[self.row_bary(i, k)] = r[k];
                }
            }
        }
        let xf = self.spec.x_final.to_array();
        for k in 0..STATE_DIM {
            c[self.row_terminal(k)] = z[self.x(n, k)] - xf[k] - z[self.terminal_slack(k)];
        }
        let l0sq = params.l0 * params.l0;
        for (q, &i) in self.leg_nodes.iter().enumerate() {
            let f = self.node_foot(i);
            let x = self.state_slice(z, i);
            let d2 = (x[0] - f.x_f).powi(2) + (x[1] - f.y_f).powi(2) + (x[2] - f.z_f).powi(2);
            c[self.row_leg(q)] = l0sq - d2;
        }
        for (q, &(i, j)) in self.obs_rows.iter().enumerate() {
            let o = &self.spec.obstacles[j];
            c[self.row_obs(q)] = obstacle_value(self.state_slice(z, i), o, self.radii[j]) + z[self.obstacle_slack(j)];
        }
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        let z = vec![0.0; self.num_vars()];
        let mut out = Vec::new();
        self.for_each_jacobian(&z, |r, c, _| out.push((r, c)));
        out
    }

    fn jacobian_values(&self, z: &[f64], vals: &mut [f64]) {
        let mut k = 0;
        self.for_each_jacobian(z, |_, _, v| {
            vals[k] = v;
            k += 1;
        });
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        let z = vec![0.0; self.num_vars()];
        let y = vec![0.0; self.num_eq() + self.num_ineq()];
        let mut out = Vec::new();
        self.for_each_hessian(&z, 1.0, &y, |r, c, _| out.push(if r >= c { (r, c) } else { (c, r) }));
        out
    }

    fn hessian_values(&self, z: &[f64], of: f64, y: &[f64], vals: &mut [f64]) {
        let mut k = 0;
        self.for_each_hessian(z, of, y, |_, _, v| {
            vals[k] = v;
            k += 1;
        });
    }

    fn kkt_order(&self) -> KktOrder {
        let n = self.spec.n;
        let mut banded = Vec::new();
        let mut leg_q = 0;
        let mut obs_q = 0;
        for i in 0..=n {
            for v in i * self.block..(i + 1) * self.block {
                banded.push(KktSlot::Var(v));
            }
            if i == n {
                for k in 0..STATE_DIM {
                    banded.push(KktSlot::Var(self.terminal_slack(k)));
                }
            }
            if i == 0 {
                for k in 0..STATE_DIM {
                    banded.push(KktSlot::Row(k));
                }
            } else {
                for k in 0..STATE_DIM {
                    banded.push(KktSlot::Row(self.row_defect(i - 1, k)));
                }
            }
            if self.enforce() {
                for k in 0..4 {
                    banded.push(KktSlot::Row(self.row_bary(i, k)));
                }
            }
            while leg_q < self.leg_nodes.len() && self.leg_nodes[leg_q] == i {
                banded.push(KktSlot::Row(self.row_leg(leg_q)));
                leg_q += 1;
            }
            while obs_q < self.obs_rows.len() && self.obs_rows[obs_q].0 == i {
                banded.push(KktSlot::Row(self.row_obs(obs_q)));
                obs_q += 1;
            }
            if i == n {
                for k in 0..STATE_DIM {
                    banded.push(KktSlot::Row(self.row_terminal(k)));
                }
            }
        }
        let border_vars = (0..self.spec.obstacles.len()).map(|j| self.obstacle_slack(j)).collect();
        KktOrder { banded, border_vars }
    }

    fn refresh(&mut self, z: &[f64]) -> bool {
        let m = self.spec.n / self.spec.steps;
        let mut changed = false;
        for k in 1..=self.spec.steps {
            let f = foot_placement_raw(self.state_slice(z, k * m), &self.spec.foot_coeffs);
            let old = self.footholds[k];
            if (f.x_f - old.x_f).abs() > 1e-12 || (f.y_f - old.y_f).abs() > 1e-12 {
                changed = true;
            }
            self.footholds[k] = f;
        }
        changed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

impl SolverOptions {
    fn ipm(&self) -> IpmOptions {
        let mut o = IpmOptions::default();
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        if let Some(t) = self.tol {
            o.tol = t;
        }
        o
    }
}

/// Solves the transcribed problem from `guess` (or the default interpolation).
pub fn solve(nlp: &mut NlpProblem, guess: Option<&Trajectory>) -> Trajectory {
    solve_with(nlp, guess, &SolverOptions::default())
}

pub fn solve_with(nlp: &mut NlpProblem, guess: Option<&Trajectory>, options: &SolverOptions) -> Trajectory {
    let start = Instant::now();
    let z0 = match guess {
        Some(t) => nlp.guess_from(t),
        None => nlp.default_guess(),
    };
    if nlp.spec.has_crossed_bounds() {
        return nlp.extract(&z0, SolveStatus::Infeasible, start.elapsed().as_secs_f64(), 0);
    }
    let result = InteriorPoint::new(nlp, options.ipm()).solve(&z0);
    let status = match result.status {
        IpmStatus::Converged => SolveStatus::Optimal,
        IpmStatus::MaxIter => SolveStatus::MaxIter,
        IpmStatus::Infeasible => SolveStatus::Infeasible,
    };
    nlp.extract(&result.x, status, start.elapsed().as_secs_f64(), result.iterations)
}

/// Transcribes and solves in one call.
pub fn solve_spec(spec: &ProblemSpec, guess: Option<&Trajectory>) -> Result<Trajectory> {
    let mut nlp = transcribe(spec)?;
    Ok(solve(&mut nlp, guess))
}
