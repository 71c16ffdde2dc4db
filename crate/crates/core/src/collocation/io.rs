//! Trajectory files: one CSV row per node plus a JSON sidecar.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::problem::{Slacks, SolveStatus, Trajectory};
use crate::error::{Error, Result};
use crate::vslip::{Foothold, Input, State};

pub const CSV_HEADER: &str = "t,qx,qy,qz,qphi,dqx,dqy,dqz,dqphi,ux,uy,uz,uphi";

pub fn to_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * traj.nodes.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, (x, u)) in traj.nodes.iter().zip(&traj.inputs).enumerate() {
        let _ = write!(out, "{}", traj.time(i));
        for v in x.to_array().iter().chain(&u.to_array()) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses node times, states and inputs from [`to_csv`] output.
pub fn from_csv(text: &str) -> Result<Vec<(f64, State, Input)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Parse(format!("line 1: expected header `{CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        if vals.len() != 13 {
            return Err(Error::Parse(format!("line {}: expected 13 columns, got {}", ln + 1, vals.len())));
        }
        let mut x = [0.0; 8];
        x.copy_from_slice(&vals[1..9]);
        let mut u = [0.0; 4];
        u.copy_from_slice(&vals[9..13]);
        rows.push((vals[0], State::from_array(x), Input::from_array(u)));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub status: SolveStatus,
    pub objective: f64,
    pub solve_time: f64,
    pub iterations: usize,
    pub dt: f64,
    pub slacks: Slacks,
    pub footholds: Vec<Foothold>,
    pub warnings: Vec<String>,
}

impl Sidecar {
    pub fn of(traj: &Trajectory) -> Self {
        Self {
            status: traj.status,
            objective: traj.objective,
            solve_time: traj.solve_time,
            iterations: traj.iterations,
            dt: traj.dt,
            slacks: traj.slacks.clone(),
            footholds: traj.footholds.clone(),
            warnings: traj.warnings.clone(),
        }
    }
}

pub fn sidecar_json(traj: &Trajectory) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Sidecar::of(traj))?)
}
