//! First-order command-tracking plant standing in for the walking controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::Command;
use crate::vslip::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantModel {
    pub tau_vx: f64,
    pub tau_vy: f64,
    pub tau_z: f64,
    pub tau_phi: f64,
    pub dt: f64,
}

impl Default for PlantModel {
    fn default() -> Self {
        Self { tau_vx: 0.3, tau_vy: 0.3, tau_z: 0.5, tau_phi: 0.4, dt: 0.01 }
    }
}

impl PlantModel {
    pub fn validate(&self) -> Result<()> {
        let taus = [self.tau_vx, self.tau_vy, self.tau_z, self.tau_phi];
        if taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config(format!("plant time constants must be positive, got {taus:?}")));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01 + 1e-12) {
            return Err(Error::Config(format!("plant step {} must lie in (0, 0.01]", self.dt)));
        }
        Ok(())
    }
}

/// Exact zero-order-hold response of a first-order lag over `dt`.
fn relax(x: f64, target: f64, tau: f64, dt: f64) -> f64 {
    target + (x - target) * (-dt / tau).exp()
}

/// Advances `s` by `dt`. Sagittal and lateral targets are body-frame and
/// are tracked in the current heading frame; positions integrate the
/// updated velocities.
pub fn plant_step(s: &State, cmd: &Command, plant: &PlantModel, dt: f64) -> State {
    let (sn, cs) = s.q_phi.sin_cos();
    let vb = [cs * s.dq_x + sn * s.dq_y, -sn * s.dq_x + cs * s.dq_y];
    let vb = [relax(vb[0], cmd.dq_x_d, plant.tau_vx, dt), relax(vb[1], cmd.dq_y_d, plant.tau_vy, dt)];
    let v = [cs * vb[0] - sn * vb[1], sn * vb[0] + cs * vb[1]];
    let q_z = relax(s.q_z, cmd.q_z_d, plant.tau_z, dt);
    let dq_phi = relax(s.dq_phi, cmd.dq_phi_d, plant.tau_phi, dt);
    State {
        q_x: s.q_x + v[0] * dt,
        q_y: s.q_y + v[1] * dt,
        q_z,
        q_phi: s.q_phi + dq_phi * dt,
        dq_x: v[0],
        dq_y: v[1],
        dq_z: (q_z - s.q_z) / dt,
        dq_phi,
    }
}
