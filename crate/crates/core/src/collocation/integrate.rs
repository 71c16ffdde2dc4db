//! Forward integration with the same implicit trapezoidal rule the
//! transcription uses, for consistency checks.

use crate::vslip::{dynamics_jacobian, dynamics_raw, Foothold, Input, RobotParams, State, STATE_DIM};

/// Integrates `n` trapezoidal steps over `horizon` seconds with a fixed
/// foothold, solving each implicit step by Newton's method.
pub fn trapezoidal_rollout(
    x0: &State,
    input: impl Fn(f64) -> Input,
    foot: &Foothold,
    params: &RobotParams,
    horizon: f64,
    n: usize,
) -> State {
    let h = horizon / n as f64;
    let mut x = x0.to_array();
    for k in 0..n {
        let ua = input(k as f64 * h).to_array();
        let ub = input((k + 1) as f64 * h).to_array();
        let fa = dynamics_raw(&x, &ua, foot, params);
        let mut xn = x;
        for k in 0..STATE_DIM {
            xn[k] += h * fa[k];
        }
        for _ in 0..50 {
            let fb = dynamics_raw(&xn, &ub, foot, params);
            let mut g = [0.0; STATE_DIM];
            for k in 0..STATE_DIM {
                g[k] = xn[k] - x[k] - 0.5 * h * (fa[k] + fb[k]);
            }
            let (fx, _) = dynamics_jacobian(&State::from_array(xn), foot, params);
            let mut jac = [[0.0; STATE_DIM]; STATE_DIM];
            for r in 0..STATE_DIM {
                for c in 0..STATE_DIM {
                    jac[r][c] = if r == c { 1.0 } else { 0.0 } - 0.5 * h * fx[r][c];
                }
            }
            let step = solve_dense(jac, g);
            let mut norm: f64 = 0.0;
            for k in 0..STATE_DIM {
                xn[k] -= step[k];
                norm = norm.max(step[k].abs());
            }
            if norm < 1e-14 {
                break;
            }
        }
        x = xn;
    }
    State::from_array(x)
}

fn solve_dense(mut a: [[f64; STATE_DIM]; STATE_DIM], mut b: [f64; STATE_DIM]) -> [f64; STATE_DIM] {
    for c in 0..STATE_DIM {
        let p = (c..STATE_DIM).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..STATE_DIM {
            let f = a[r][c] / a[c][c];
            for k in c..STATE_DIM {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; STATE_DIM];
    for r in (0..STATE_DIM).rev() {
        let s: f64 = (r + 1..STATE_DIM).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
