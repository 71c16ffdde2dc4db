//! Vertically-actuated spring-loaded inverted pendulum (vSLIP).
//!
//! A point mass rides on a single massless spring leg whose stiffness depends
//! on the leg length, with an extra virtual actuation along every axis. Yaw is
//! decoupled and modelled as a double integrator. The next foothold is not
//! planned online; it comes from a first-order regression of the leg length,
//! leg pitch and abduction on the gait parameters at the end of a step.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Index of each component in the flat 8-vector form of [`State`].
pub mod idx {
    pub const QX: usize = 0;
    pub const QY: usize = 1;
    pub const QZ: usize = 2;
    pub const QPHI: usize = 3;
    pub const DQX: usize = 4;
    pub const DQY: usize = 5;
    pub const DQZ: usize = 6;
    pub const DQPHI: usize = 7;
}

pub const STATE_DIM: usize = 8;
pub const INPUT_DIM: usize = 4;

/// CoM position, yaw and their rates in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub q_x: f64,
    pub q_y: f64,
    pub q_z: f64,
    pub q_phi: f64,
    pub dq_x: f64,
    pub dq_y: f64,
    pub dq_z: f64,
    pub dq_phi: f64,
}

impl State {
    pub fn standing(x: f64, y: f64, height: f64, yaw: f64) -> Self {
        Self::from_array([x, y, height, yaw, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self { q_x: a[0], q_y: a[1], q_z: a[2], q_phi: a[3], dq_x: a[4], dq_y: a[5], dq_z: a[6], dq_phi: a[7] }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.q_x, self.q_y, self.q_z, self.q_phi, self.dq_x, self.dq_y, self.dq_z, self.dq_phi]
    }

    /// Gait parameter `(dq_x, dq_y, q_z)`.
    pub fn gait_parameter(&self) -> [f64; 3] {
        [self.dq_x, self.dq_y, self.q_z]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.q_z > 0.0
    }

    pub fn planar_speed(&self) -> f64 {
        self.dq_x.hypot(self.dq_y)
    }
}

/// Virtual CoM accelerations and yaw acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Input {
    pub u_x: f64,
    pub u_y: f64,
    pub u_z: f64,
    pub u_phi: f64,
}

impl Input {
    pub fn from_array(a: [f64; INPUT_DIM]) -> Self {
        Self { u_x: a[0], u_y: a[1], u_z: a[2], u_phi: a[3] }
    }

    pub fn to_array(&self) -> [f64; INPUT_DIM] {
        [self.u_x, self.u_y, self.u_z, self.u_phi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Foothold {
    pub x_f: f64,
    pub y_f: f64,
    #[serde(default)]
    pub z_f: f64,
}

impl Foothold {
    pub fn new(x_f: f64, y_f: f64) -> Self {
        Self { x_f, y_f, z_f: 0.0 }
    }
}

/// Physical parameters of the reduced-order model.
///
/// The default spring is close to constant-force over the walking-height
/// range (its support force stays within 10% of the weight between 0.65 m and
/// 1.0 m) and balances gravity exactly at a 0.9 m vertical leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub m: f64,
    pub l0: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta4: f64,
    pub g: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            m: 33.0,
            l0: 1.2,
            beta0: 363.633_468_682_183_43,
            beta1: 0.0,
            beta2: 0.0,
            beta4: 1_090.483_967_867_423_9,
            g: 9.81,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::Config(format!("robot mass must be positive, got {}", self.m)));
        }
        if !(self.l0 > 0.0) {
            return Err(Error::Config(format!("leg length l0 must be positive, got {}", self.l0)));
        }
        // K is a polynomial; checking a fine lattice over (0, l0] is enough for
        // the low-order shapes used here.
        for k in 1..=1000 {
            let l = self.l0 * k as f64 / 1000.0;
            if self.stiffness_unchecked(l) <= 0.0 {
                return Err(Error::Config(format!("stiffness K({l:.4}) is not positive")));
            }
        }
        Ok(())
    }

    fn stiffness_unchecked(&self, l: f64) -> f64 {
        let l2 = l * l;
        self.beta0 + self.beta1 * l + self.beta2 * l2 + self.beta4 * l2 * l2
    }

    /// `(K, dK/dl, d²K/dl²)`.
    fn stiffness_derivs(&self, l: f64) -> (f64, f64, f64) {
        let l2 = l * l;
        let k = self.stiffness_unchecked(l);
        let dk = self.beta1 + 2.0 * self.beta2 * l + 4.0 * self.beta4 * l2 * l;
        let ddk = 2.0 * self.beta2 + 12.0 * self.beta4 * l2;
        (k, dk, ddk)
    }

    /// `γ(l) = K(l)/m · (l0/l − 1)` and its first two derivatives in `l`.
    pub fn gamma_derivs(&self, l: f64) -> (f64, f64, f64) {
        let (k, dk, ddk) = self.stiffness_derivs(l);
        let r = self.l0 / l - 1.0;
        let dr = -self.l0 / (l * l);
        let ddr = 2.0 * self.l0 / (l * l * l);
        let inv_m = 1.0 / self.m;
        (k * r * inv_m, (dk * r + k * dr) * inv_m, (ddk * r + 2.0 * dk * dr + k * ddr) * inv_m)
    }

    pub fn gamma(&self, l: f64) -> f64 {
        self.gamma_derivs(l).0
    }
}

/// Leg stiffness `β0 + β1·l + β2·l² + β4·l⁴`.
pub fn stiffness(l: f64, params: &RobotParams) -> Result<f64> {
    if !(l > 0.0 && l <= params.l0) {
        return Err(Error::Domain(format!("leg length {l} outside (0, {}]", params.l0)));
    }
    Ok(params.stiffness_unchecked(l))
}

/// Distance from the CoM to the foothold.
pub fn leg_length(state: &State, foothold: &Foothold) -> f64 {
    leg_vector(&state.to_array(), foothold).2
}

fn leg_vector(x: &[f64], foot: &Foothold) -> ([f64; 3], f64, f64) {
    let d = [x[idx::QX] - foot.x_f, x[idx::QY] - foot.y_f, x[idx::QZ] - foot.z_f];
    let l2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    (d, l2, l2.sqrt())
}

/// State derivative `[dq, q̈]` of the vSLIP model.
pub fn dynamics(state: &State, input: &Input, foothold: &Foothold, params: &RobotParams) -> Result<[f64; STATE_DIM]> {
    let l = leg_length(state, foothold);
    if !(l > 0.0 && l <= params.l0) || !state.is_valid() {
        return Err(Error::Domain(format!("leg length {l} outside (0, {}] for state {state:?}", params.l0)));
    }
    Ok(dynamics_raw(&state.to_array(), &input.to_array(), foothold, params))
}

/// Dynamics without the leg-length domain check. The optimizer evaluates
/// trial points that may transiently leave the domain.
pub fn dynamics_raw(x: &[f64], u: &[f64], foot: &Foothold, params: &RobotParams) -> [f64; STATE_DIM] {
    let (d, _, l) = leg_vector(x, foot);
    let gamma = params.gamma(l);
    [
        x[idx::DQX],
        x[idx::DQY],
        x[idx::DQZ],
        x[idx::DQPHI],
        gamma * d[0] + u[0],
        gamma * d[1] + u[1],
        gamma * d[2] - params.g + u[2],
        u[3],
    ]
}

/// Partial derivatives of the three CoM accelerations with respect to the
/// CoM position. Entry `[k][j]` is `∂q̈_k/∂q_j`.
pub fn accel_position_jacobian(x: &[f64], foot: &Foothold, params: &RobotParams) -> [[f64; 3]; 3] {
    let (d, _, l) = leg_vector(x, foot);
    let (gamma, dgamma, _) = params.gamma_derivs(l);
    let grad_gamma = [dgamma * d[0] / l, dgamma * d[1] / l, dgamma * d[2] / l];
    let mut out = [[0.0; 3]; 3];
    for k in 0..3 {
        for j in 0..3 {
            out[k][j] = d[k] * grad_gamma[j] + if k == j { gamma } else { 0.0 };
        }
    }
    out
}

/// Second derivatives of the three CoM accelerations with respect to the CoM
/// position; `[k]` is the symmetric 3×3 Hessian of `q̈_k`.
pub fn accel_position_hessian(x: &[f64], foot: &Foothold, params: &RobotParams) -> [[[f64; 3]; 3]; 3] {
    let (d, _, l) = leg_vector(x, foot);
    let (_, dgamma, ddgamma) = params.gamma_derivs(l);
    let n = [d[0] / l, d[1] / l, d[2] / l];
    let grad_gamma = [dgamma * n[0], dgamma * n[1], dgamma * n[2]];
    let mut hess_gamma = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let eye = if a == b { 1.0 } else { 0.0 };
            hess_gamma[a][b] = ddgamma * n[a] * n[b] + dgamma * (eye - n[a] * n[b]) / l;
        }
    }
    let mut out = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                let mut v = d[k] * hess_gamma[a][b];
                if a == k {
                    v += grad_gamma[b];
                }
                if b == k {
                    v += grad_gamma[a];
                }
                out[k][a][b] = v;
            }
        }
    }
    out
}

/// Full Jacobian of [`dynamics`] with respect to state (8×8) and input (8×4).
pub fn dynamics_jacobian(
    state: &State,
    foothold: &Foothold,
    params: &RobotParams,
) -> ([[f64; STATE_DIM]; STATE_DIM], [[f64; INPUT_DIM]; STATE_DIM]) {
    let x = state.to_array();
    let mut fx = [[0.0; STATE_DIM]; STATE_DIM];
    let mut fu = [[0.0; INPUT_DIM]; STATE_DIM];
    for k in 0..4 {
        fx[k][k + 4] = 1.0;
    }
    let ja = accel_position_jacobian(&x, foothold, params);
    for k in 0..3 {
        for j in 0..3 {
            fx[4 + k][j] = ja[k][j];
        }
    }
    for k in 0..4 {
        fu[4 + k][k] = 1.0;
    }
    (fx, fu)
}

/// Coefficients of the first-order foot-placement regression.
///
/// ```text
/// [q'_LL]   [a11  0  a13] [dq_x]
/// [q'_LA] = [a21  0  a23] [dq_y] + b
/// [q'_1 ]   [ 0  a32 a33] [q_z ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootPlacementCoeffs {
    pub a11: f64,
    pub a13: f64,
    pub a21: f64,
    pub a23: f64,
    pub a32: f64,
    pub a33: f64,
    pub b: [f64; 3],
}

impl Default for FootPlacementCoeffs {
    /// Least-squares fit of [`GaitOracle::default`] over the 11×11×11 gait grid.
    fn default() -> Self {
        Self {
            a11: 0.0,
            a13: 1.008_888_062_061_119_4,
            a21: -0.209_424_334_303_676_8,
            a23: 0.0,
            a32: 0.208_430_047_101_499_43,
            a33: 0.0,
            b: [0.0, FRAC_PI_2, 0.0],
        }
    }
}

impl FootPlacementCoeffs {
    /// Predicted `(q'_LL, q'_LA, q'_1)` for gait parameter `(dq_x, dq_y, q_z)`.
    pub fn predict(&self, p: [f64; 3]) -> [f64; 3] {
        let [vx, vy, h] = p;
        [
            self.a11 * vx + self.a13 * h + self.b[0],
            self.a21 * vx + self.a23 * h + self.b[1],
            self.a32 * vy + self.a33 * h + self.b[2],
        ]
    }
}

/// Next foothold from the final state of a step.
pub fn foot_placement(final_state: &State, coeffs: &FootPlacementCoeffs, params: &RobotParams) -> Result<Foothold> {
    let [ll, _, _] = coeffs.predict(final_state.gait_parameter());
    if !(ll > 0.0 && ll <= params.l0) {
        return Err(Error::Domain(format!("predicted leg length {ll} outside (0, {}]", params.l0)));
    }
    Ok(foot_placement_raw(&final_state.to_array(), coeffs))
}

/// Foothold without range checks on the predicted leg length.
pub fn foot_placement_raw(x: &[f64], coeffs: &FootPlacementCoeffs) -> Foothold {
    let [ll, la, q1] = coeffs.predict([x[idx::DQX], x[idx::DQY], x[idx::QZ]]);
    let reach = ll * la.cos();
    Foothold::new(x[idx::QX] + reach * q1.cos(), x[idx::QY] + reach * q1.sin())
}

/// One observation for [`fit_foot_placement`]: gait parameter and the leg
/// length, leg pitch and abduction at the start of the following step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitSample {
    pub gait: [f64; 3],
    pub leg_length: f64,
    pub leg_pitch: f64,
    pub abduction: f64,
}

pub const SAMPLES_HEADER: &str = "vx,vy,z,leg_length,leg_pitch,abduction";

pub fn samples_to_csv(samples: &[GaitSample]) -> String {
    let mut out = format!("{SAMPLES_HEADER}\n");
    for s in samples {
        let [a, b, c] = s.gait;
        out.push_str(&format!("{a},{b},{c},{},{},{}\n", s.leg_length, s.leg_pitch, s.abduction));
    }
    out
}

pub fn parse_samples_csv(text: &str) -> Result<Vec<GaitSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SAMPLES_HEADER => {}
        _ => return Err(Error::Parse(format!("line 1: expected header `{SAMPLES_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        if v.len() != 6 {
            return Err(Error::Parse(format!("line {}: expected 6 fields, found {}", n + 1, v.len())));
        }
        out.push(GaitSample { gait: [v[0], v[1], v[2]], leg_length: v[3], leg_pitch: v[4], abduction: v[5] });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootPlacementFit {
    pub coeffs: FootPlacementCoeffs,
    /// Residual RMS for `(q'_LL, q'_LA, q'_1)`.
    pub residual_rms: [f64; 3],
    pub r_squared: [f64; 3],
}

/// Least-squares regression honouring the sparsity of the foot-placement map.
pub fn fit_foot_placement(samples: &[GaitSample]) -> Result<FootPlacementFit> {
    if samples.len() < 6 {
        return Err(Error::RankDeficient(format!("need at least 6 samples, got {}", samples.len())));
    }
    let targets: [Vec<f64>; 3] = [
        samples.iter().map(|s| s.leg_length).collect(),
        samples.iter().map(|s| s.leg_pitch).collect(),
        samples.iter().map(|s| s.abduction).collect(),
    ];
    // Regressor columns per output: (speed axis, height) plus an intercept.
    let axes = [0usize, 0, 1];
    let mut fitted = [[0.0; 3]; 3];
    let mut rms = [0.0; 3];
    let mut r2 = [0.0; 3];
    for out in 0..3 {
        let design: Vec<[f64; 3]> = samples.iter().map(|s| [s.gait[axes[out]], s.gait[2], 1.0]).collect();
        let coef = lstsq3(&design, &targets[out])?;
        let y = &targets[out];
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for (row, &yi) in design.iter().zip(y) {
            let pred = coef[0] * row[0] + coef[1] * row[1] + coef[2];
            ss_res += (yi - pred).powi(2);
            ss_tot += (yi - mean).powi(2);
        }
        rms[out] = (ss_res / y.len() as f64).sqrt();
        r2[out] = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        fitted[out] = coef;
    }
    Ok(FootPlacementFit {
        coeffs: FootPlacementCoeffs {
            a11: fitted[0][0],
            a13: fitted[0][1],
            a21: fitted[1][0],
            a23: fitted[1][1],
            a32: fitted[2][0],
            a33: fitted[2][1],
            b: [fitted[0][2], fitted[1][2], fitted[2][2]],
        },
        residual_rms: rms,
        r_squared: r2,
    })
}

/// Householder QR solve of a tall n×3 least-squares problem.
fn lstsq3(rows: &[[f64; 3]], y: &[f64]) -> Result<[f64; 3]> {
    let n = rows.len();
    let mut a: Vec<[f64; 3]> = rows.to_vec();
    let mut b = y.to_vec();
    let scale = rows.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut r_diag = [0.0; 3];
    for k in 0..3 {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale * (n as f64).sqrt() {
            return Err(Error::RankDeficient(format!("design column {k} is degenerate")));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..3 {
                let dot: f64 = (k..n).map(|i| v[i - k] * a[i][j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..n {
                    a[i][j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..n).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                b[i] -= f * v[i - k];
            }
        }
        r_diag[k] = a[k][k];
        if r_diag[k].abs() <= 1e-10 * scale {
            return Err(Error::RankDeficient(format!("design column {k} is dependent")));
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut s = b[k];
        for j in k + 1..3 {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

/// Synthetic stand-in for a full-order gait library.
///
/// For a gait `(v_x, v_y, h)` the stance leg leans forward by
/// `θ = asin(v_x·T/(2·l0))` from vertical, so the leg pitch measured from
/// the horizontal is `π/2 − θ`; abduction is `asin(v_y·T/(2·l0))`; and the
/// leg length keeps the CoM at height `h`, capped at `l0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitOracle {
    pub step_duration: f64,
    pub l0: f64,
}

impl Default for GaitOracle {
    fn default() -> Self {
        Self { step_duration: 0.5, l0: RobotParams::default().l0 }
    }
}

impl GaitOracle {
    pub fn sample(&self, gait: [f64; 3]) -> GaitSample {
        let [vx, vy, h] = gait;
        let lean = (vx * self.step_duration / (2.0 * self.l0)).clamp(-1.0, 1.0).asin();
        let abduction = (vy * self.step_duration / (2.0 * self.l0)).clamp(-1.0, 1.0).asin();
        GaitSample { gait, leg_length: (h / lean.cos()).min(self.l0), leg_pitch: FRAC_PI_2 - lean, abduction }
    }

    /// Gait grid with 11 levels per axis spanning the gait-library ranges:
    /// `dq_x ∈ [−1, 1]`, `dq_y ∈ [−0.3, 0.3]`, `q_z ∈ [0.65, 1.0]`.
    pub fn library_grid(&self) -> Vec<GaitSample> {
        let lin = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / 10.0;
        let mut out = Vec::with_capacity(1331);
        for i in 0..11 {
            for j in 0..11 {
                for k in 0..11 {
                    out.push(self.sample([lin(-1.0, 1.0, i), lin(-0.3, 0.3, j), lin(0.65, 1.0, k)]));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_with(beta: [f64; 4]) -> RobotParams {
        RobotParams { beta0: beta[0], beta1: beta[1], beta2: beta[2], beta4: beta[3], ..Default::default() }
    }

    #[test]
    fn stiffness_trivial_values() {
        assert_eq!(stiffness(0.8, &params_with([1000.0, 0.0, 0.0, 0.0])).unwrap(), 1000.0);
        assert!((stiffness(1.0, &params_with([100.0, 10.0, 1.0, 1.0])).unwrap() - 112.0).abs() < 1e-12);
    }

    #[test]
    fn stiffness_matches_horner() {
        let p = RobotParams::default();
        let l: f64 = 0.9;
        let horner = p.beta0 + l * (p.beta1 + l * (p.beta2 + l * (0.0 + l * p.beta4)));
        assert!((stiffness(l, &p).unwrap() - horner).abs() < 1e-12 * horner.abs().max(1.0));
    }

    #[test]
    fn stiffness_domain() {
        let p = RobotParams::default();
        assert!(stiffness(0.0, &p).is_err());
        assert!(stiffness(-0.1, &p).is_err());
        assert!(stiffness(p.l0 + 1e-9, &p).is_err());
        assert!(stiffness(p.l0, &p).is_ok());
    }

    #[test]
    fn default_params_are_valid() {
        RobotParams::default().validate().unwrap();
    }

    #[test]
    fn leg_length_examples() {
        let f = Foothold::new(0.0, 0.0);
        assert_eq!(leg_length(&State::standing(0.0, 0.0, 1.0, 0.0), &f), 1.0);
        assert!((leg_length(&State::standing(0.3, 0.0, 0.4, 0.0), &f) - 0.5).abs() < 1e-15);
        let s = State::standing(0.1, 0.2, 0.9, 0.0);
        let expect = (0.05f64.powi(2) + 0.1f64.powi(2) + 0.9f64.powi(2)).sqrt();
        assert!((leg_length(&s, &Foothold::new(0.05, 0.1)) - expect).abs() < 1e-15);
    }

    #[test]
    fn hover_at_full_extension() {
        let p = RobotParams::default();
        let s = State::standing(0.0, 0.0, p.l0, 0.0);
        let u = Input { u_z: p.g, ..Default::default() };
        let f = dynamics(&s, &u, &Foothold::new(0.0, 0.0), &p).unwrap();
        assert_eq!(p.gamma(p.l0), 0.0);
        assert_eq!(f[idx::DQZ], 0.0);
    }

    #[test]
    fn yaw_is_a_double_integrator() {
        let p = RobotParams::default();
        let s = State::from_array([0.1, -0.2, 0.85, 1.3, 0.4, 0.1, 0.0, -0.2]);
        let u = Input { u_phi: 0.5, ..Default::default() };
        let f = dynamics(&s, &u, &Foothold::new(0.05, 0.0), &p).unwrap();
        assert_eq!(f[7], 0.5);
    }

    #[test]
    fn compressed_leg_vertical_accel() {
        let p = RobotParams::default();
        let h = 0.9 * p.l0;
        let s = State::standing(0.0, 0.0, h, 0.0);
        let f = dynamics(&s, &Input::default(), &Foothold::new(0.0, 0.0), &p).unwrap();
        let k = p.beta0 + p.beta1 * h + p.beta2 * h * h + p.beta4 * h.powi(4);
        let expect = k / p.m * (1.0 / 0.9 - 1.0) * h - p.g;
        assert_eq!(f[4], 0.0);
        assert_eq!(f[5], 0.0);
        assert!((f[6] - expect).abs() < 1e-10);
    }

    #[test]
    fn default_spring_balances_weight_at_point_nine() {
        let p = RobotParams::default();
        let f = dynamics(&State::standing(0.0, 0.0, 0.9, 0.0), &Input::default(), &Foothold::default(), &p).unwrap();
        assert!(f[6].abs() < 1e-9, "residual vertical accel {}", f[6]);
    }

    #[test]
    fn dynamics_rejects_overextended_leg() {
        let p = RobotParams::default();
        let s = State::standing(1.0, 0.0, 1.0, 0.0);
        assert!(dynamics(&s, &Input::default(), &Foothold::default(), &p).is_err());
    }

    #[test]
    fn foot_placement_vertical_leg() {
        let p = RobotParams::default();
        let c = FootPlacementCoeffs {
            a11: 0.0,
            a13: 1.0,
            a21: 0.0,
            a23: 0.0,
            a32: 0.3,
            a33: 0.0,
            b: [0.0, FRAC_PI_2, 0.2],
        };
        let s = State::from_array([1.5, -0.4, 0.9, 0.0, 0.6, 0.2, 0.0, 0.0]);
        let f = foot_placement(&s, &c, &p).unwrap();
        assert!((f.x_f - 1.5).abs() < 1e-15);
        assert!((f.y_f + 0.4).abs() < 1e-15);
    }

    #[test]
    fn foot_placement_zero_abduction() {
        let p = RobotParams::default();
        let c = FootPlacementCoeffs { b: [0.0, 1.2, 0.0], a32: 0.0, ..Default::default() };
        let s = State::from_array([0.3, 0.7, 0.9, 0.0, 0.5, 0.3, 0.0, 0.0]);
        let f = foot_placement(&s, &c, &p).unwrap();
        assert_eq!(f.y_f, 0.7);
        assert!(f.x_f > 0.3);
    }

    #[test]
    fn foot_placement_rejects_bad_leg_length() {
        let p = RobotParams::default();
        let c = FootPlacementCoeffs { a13: 0.0, b: [-0.1, 1.0, 0.0], ..Default::default() };
        assert!(foot_placement(&State::standing(0.0, 0.0, 0.9, 0.0), &c, &p).is_err());
        let c = FootPlacementCoeffs { a13: 0.0, b: [p.l0 + 0.1, 1.0, 0.0], ..Default::default() };
        assert!(foot_placement(&State::standing(0.0, 0.0, 0.9, 0.0), &c, &p).is_err());
    }

    #[test]
    fn default_coefficients_match_oracle_fit() {
        let fit = fit_foot_placement(&GaitOracle::default().library_grid()).unwrap();
        let d = FootPlacementCoeffs::default();
        let pairs = [
            (fit.coeffs.a11, d.a11),
            (fit.coeffs.a13, d.a13),
            (fit.coeffs.a21, d.a21),
            (fit.coeffs.a23, d.a23),
            (fit.coeffs.a32, d.a32),
            (fit.coeffs.a33, d.a33),
            (fit.coeffs.b[0], d.b[0]),
            (fit.coeffs.b[1], d.b[1]),
            (fit.coeffs.b[2], d.b[2]),
        ];
        for (a, b) in pairs {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn default_placement_tracks_oracle_at_reference_gait() {
        let params = RobotParams::default();
        let oracle = GaitOracle::default();
        let fit = fit_foot_placement(&oracle.library_grid()).unwrap();
        let s = State::from_array([0.0, 0.0, 0.9, 0.0, 0.5, 0.0, 0.0, 0.0]);
        let got = foot_placement(&s, &FootPlacementCoeffs::default(), &params).unwrap();
        let truth = oracle.sample([0.5, 0.0, 0.9]);
        let reach = truth.leg_length * truth.leg_pitch.cos();
        let (ex, ey) = (reach * truth.abduction.cos(), reach * truth.abduction.sin());
        // Position error bounded by the propagated residuals of the fit.
        let bound = 3.0 * (fit.residual_rms[0] + fit.residual_rms[1] + fit.residual_rms[2]);
        assert!((got.x_f - ex).abs() <= bound, "{} vs {ex}", got.x_f);
        assert!((got.y_f - ey).abs() <= bound);
    }

    #[test]
    fn five_samples_is_rank_deficient() {
        let grid = GaitOracle::default().library_grid();
        assert!(matches!(fit_foot_placement(&grid[..5]), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn collinear_samples_are_rank_deficient() {
        let samples: Vec<GaitSample> =
            (0..10).map(|k| GaitOracle::default().sample([0.1 * k as f64, 0.0, 0.9])).collect();
        assert!(matches!(fit_foot_placement(&samples), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn samples_csv_round_trip() {
        let samples = GaitOracle::default().library_grid();
        let back = parse_samples_csv(&samples_to_csv(&samples)).unwrap();
        assert_eq!(back, samples);
        let err = parse_samples_csv(&format!("{SAMPLES_HEADER}\n1,2,x,4,5,6\n")).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
