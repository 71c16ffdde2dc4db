//! Primal-dual interior-point method with a filter line search.
//!
//! Solves
//!
//! ```text
//! min f(x)  s.t.  c(x) = 0,  g(x) ≥ 0,  x_L ≤ x ≤ x_U
//! ```
//!
//! using exact second derivatives. Inequalities get explicit slacks
//! `g(x) − s = 0, s ≥ 0`, which are eliminated from the Newton system so the
//! KKT matrix keeps the banded structure the problem declares through
//! [`KktOrder`]. The barrier parameter follows the monotone Fiacco-McCormick
//! rule. Failed line searches fall back to a Gauss-Newton feasibility phase.

use super::banded::{BorderedBand, Factorization};

/// Slot in the banded part of the KKT matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktSlot {
    Var(usize),
    /// Constraint row: equalities first, then inequalities.
    Row(usize),
}

/// Symmetric permutation that makes the KKT matrix banded, plus the
/// variables that couple globally and go to the dense border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KktOrder {
    pub banded: Vec<KktSlot>,
    pub border_vars: Vec<usize>,
}

pub trait NlpFunctions {
    fn num_vars(&self) -> usize;
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    /// Equality residuals followed by inequality values `g(x)`.
    fn constraints(&self, x: &[f64], c: &mut [f64]);
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]);
    /// Lower-triangle `(row ≥ col)` pattern of the Lagrangian Hessian.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// `obj_factor·∇²f + Σ y_i ∇²c_i` on [`NlpFunctions::hessian_structure`].
    fn hessian_values(&self, x: &[f64], obj_factor: f64, y: &[f64], vals: &mut [f64]);
    fn kkt_order(&self) -> KktOrder;
    /// Hook for parameters that are recomputed from the iterate during the
    /// first [`IpmOptions::refresh_iterations`] iterations. Returns whether
    /// anything changed.
    fn refresh(&mut self, _x: &[f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Tolerance on scaled stationarity and on constraint violation.
    pub tol: f64,
    /// Tolerance on the complementarity products.
    pub compl_tol: f64,
    pub mu_init: f64,
    pub refresh_iterations: usize,
    /// Violation the feasibility phase must reach before giving up.
    pub infeasibility_threshold: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-4,
            compl_tol: 1e-8,
            mu_init: 0.1,
            refresh_iterations: 10,
            infeasibility_threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub x: Vec<f64>,
    /// Multipliers of `c` and of `g − s`.
    pub y: Vec<f64>,
    pub status: IpmStatus,
    pub iterations: usize,
    pub objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

const KAPPA_1: f64 = 1e-2;
const KAPPA_2: f64 = 1e-2;
const KAPPA_SIGMA: f64 = 1e10;
const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const ETA_PHI: f64 = 1e-8;
const S_PHI: f64 = 2.3;
const S_THETA: f64 = 1.1;
const GAMMA_ALPHA: f64 = 0.05;
const DELTA_C: f64 = 1e-9;
const DELTA_W_INIT: f64 = 1e-4;
const DELTA_W_MAX: f64 = 1e40;
const MAX_SOC: usize = 4;
const S_MAX: f64 = 100.0;

struct Layout {
    n: usize,
    me: usize,
    mi: usize,
    nband: usize,
    pos_var: Vec<usize>,
    pos_row: Vec<usize>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
    jac_pos: Vec<(usize, usize)>,
    hess_pos: Vec<(usize, usize)>,
    bw: usize,
    nborder: usize,
}

impl Layout {
    fn new<P: NlpFunctions + ?Sized>(p: &P) -> Self {
        let n = p.num_vars();
        let me = p.num_eq();
        let mi = p.num_ineq();
        let order = p.kkt_order();
        let mut pos_var = vec![usize::MAX; n];
        let mut pos_row = vec![usize::MAX; me + mi];
        for (k, slot) in order.banded.iter().enumerate() {
            match *slot {
                KktSlot::Var(v) => pos_var[v] = k,
                KktSlot::Row(r) => pos_row[r] = k,
            }
        }
        let nband = order.banded.len();
        for (k, &v) in order.border_vars.iter().enumerate() {
            pos_var[v] = nband + k;
        }
        assert!(pos_var.iter().all(|&p| p != usize::MAX), "kkt order misses a variable");
        assert!(pos_row.iter().all(|&p| p != usize::MAX), "kkt order misses a row");
        let jac = p.jacobian_structure();
        let hess = p.hessian_structure();
        let jac_pos: Vec<_> = jac.iter().map(|&(r, c)| (pos_row[r], pos_var[c])).collect();
        let hess_pos: Vec<_> = hess.iter().map(|&(r, c)| (pos_var[r], pos_var[c])).collect();
        let mut bw = 0;
        for &(a, b) in jac_pos.iter().chain(&hess_pos) {
            if a < nband && b < nband {
                bw = bw.max(a.abs_diff(b));
            }
        }
        Self { n, me, mi, nband, pos_var, pos_row, jac, hess, jac_pos, hess_pos, bw, nborder: order.border_vars.len() }
    }

    fn m(&self) -> usize {
        self.me + self.mi
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    vs: Vec<f64>,
}

struct Evaluated {
    f: f64,
    grad: Vec<f64>,
    /// `[c(x); g(x) − s]`.
    c: Vec<f64>,
    jac: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dy: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
    dvs: Vec<f64>,
}

pub struct InteriorPoint<'a, P: NlpFunctions + ?Sized> {
    p: &'a mut P,
    opts: IpmOptions,
    lay: Layout,
    xl: Vec<f64>,
    xu: Vec<f64>,
    has_l: Vec<bool>,
    has_u: Vec<bool>,
    kkt: BorderedBand,
    hess_vals: Vec<f64>,
    last_delta_w: f64,
}

fn finite_bound(v: f64) -> bool {
    v.is_finite() && v.abs() < 1e19
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm_1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a, P: NlpFunctions + ?Sized> InteriorPoint<'a, P> {
    pub fn new(p: &'a mut P, opts: IpmOptions) -> Self {
        let lay = Layout::new(p);
        let (xl, xu) = p.bounds();
        let has_l: Vec<bool> = xl.iter().map(|&v| finite_bound(v)).collect();
        let has_u: Vec<bool> = xu.iter().map(|&v| finite_bound(v)).collect();
        let kkt = BorderedBand::new(lay.nband, lay.bw, lay.nborder);
        let hess_vals = vec![0.0; lay.hess.len()];
        Self { p, opts, lay, xl, xu, has_l, has_u, kkt, hess_vals, last_delta_w: 0.0 }
    }

    pub fn bandwidth(&self) -> usize {
        self.lay.bw
    }

    fn evaluate(&self, it: &Iterate) -> Evaluated {
        let (n, me, m) = (self.lay.n, self.lay.me, self.lay.m());
        let mut grad = vec![0.0; n];
        self.p.gradient(&it.x, &mut grad);
        let mut c = vec![0.0; m];
        self.p.constraints(&it.x, &mut c);
        for i in 0..self.lay.mi {
            c[me + i] -= it.s[i];
        }
        let mut jac = vec![0.0; self.lay.jac.len()];
        self.p.jacobian_values(&it.x, &mut jac);
        Evaluated { f: self.p.objective(&it.x), grad, c, jac }
    }

    fn trial_values(&self, x: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
        let mut c = vec![0.0; self.lay.m()];
        self.p.constraints(x, &mut c);
        for i in 0..self.lay.mi {
            c[self.lay.me + i] -= s[i];
        }
        (self.p.objective(x), c)
    }

    fn barrier(&self, f: f64, x: &[f64], s: &[f64], mu: f64) -> f64 {
        let mut phi = f;
        for i in 0..self.lay.n {
            if self.has_l[i] {
                phi -= mu * (x[i] - self.xl[i]).ln();
            }
            if self.has_u[i] {
                phi -= mu * (self.xu[i] - x[i]).ln();
            }
        }
        for &si in s {
            phi -= mu * si.ln();
        }
        phi
    }

    /// `∇f + Jᵀy − z_L + z_U`.
    fn lagrangian_gradient(&self, ev: &Evaluated, it: &Iterate) -> Vec<f64> {
        let mut r = ev.grad.clone();
        for (k, &(row, col)) in self.lay.jac.iter().enumerate() {
            r[col] += ev.jac[k] * it.y[row];
        }
        for i in 0..self.lay.n {
            r[i] += it.zu[i] - it.zl[i];
        }
        r
    }

    /// `(stationarity, primal, complementarity)` errors for barrier `mu`.
    fn errors(&self, ev: &Evaluated, it: &Iterate, mu: f64) -> (f64, f64, f64) {
        let me = self.lay.me;
        let grad_l = self.lagrangian_gradient(ev, it);
        let mut dual = norm_inf(&grad_l);
        for i in 0..self.lay.mi {
            dual = dual.max((-it.y[me + i] - it.vs[i]).abs());
        }
        let primal = norm_inf(&ev.c);
        let mut compl: f64 = 0.0;
        for i in 0..self.lay.n {
            if self.has_l[i] {
                compl = compl.max(((it.x[i] - self.xl[i]) * it.zl[i] - mu).abs());
            }
            if self.has_u[i] {
                compl = compl.max(((self.xu[i] - it.x[i]) * it.zu[i] - mu).abs());
            }
        }
        for i in 0..self.lay.mi {
            compl = compl.max((it.s[i] * it.vs[i] - mu).abs());
        }
        let nmult = (self.lay.m() + 2 * self.lay.n + self.lay.mi).max(1) as f64;
        let mult_sum = norm_1(&it.y) + norm_1(&it.zl) + norm_1(&it.zu) + norm_1(&it.vs);
        let sd = (mult_sum / nmult).max(S_MAX) / S_MAX;
        (dual / sd, primal, compl)
    }

    fn initial_iterate(&self, x0: &[f64]) -> Iterate {
        let n = self.lay.n;
        let mut x = x0.to_vec();
        for i in 0..n {
            let (l, u) = (self.xl[i], self.xu[i]);
            match (self.has_l[i], self.has_u[i]) {
                (true, true) => {
                    let push = (KAPPA_1 * l.abs().max(1.0)).min(KAPPA_2 * (u - l));
                    x[i] = x[i].clamp(l + push, u - push);
                }
                (true, false) => x[i] = x[i].max(l + KAPPA_1 * l.abs().max(1.0)),
                (false, true) => x[i] = x[i].min(u - KAPPA_1 * u.abs().max(1.0)),
                (false, false) => {}
            }
        }
        let mut c = vec![0.0; self.lay.m()];
        self.p.constraints(&x, &mut c);
        let s: Vec<f64> = c[self.lay.me..].iter().map(|&g| g.max(KAPPA_1)).collect();
        Iterate {
            x,
            y: vec![0.0; self.lay.m()],
            zl: (0..n).map(|i| if self.has_l[i] { 1.0 } else { 0.0 }).collect(),
            zu: (0..n).map(|i| if self.has_u[i] { 1.0 } else { 0.0 }).collect(),
            vs: vec![1.0; self.lay.mi],
            s,
        }
    }

    fn sigma_x(&self, it: &Iterate) -> Vec<f64> {
        (0..self.lay.n)
            .map(|i| {
                let mut v = 0.0;
                if self.has_l[i] {
                    v += it.zl[i] / (it.x[i] - self.xl[i]);
                }
                if self.has_u[i] {
                    v += it.zu[i] / (self.xu[i] - it.x[i]);
                }
                v
            })
            .collect()
    }

    /// Builds and factors the KKT matrix with inertia correction. `hess` is
    /// `None` in the feasibility phase, which uses a proximal term instead.
    fn factor(
        &mut self,
        it: &Iterate,
        jac: &[f64],
        hess: Option<&[f64]>,
        prox: f64,
    ) -> Option<(Factorization, f64, Vec<f64>)> {
        let sx = self.sigma_x(it);
        let sigma_s: Vec<f64> = (0..self.lay.mi).map(|i| it.vs[i] / it.s[i]).collect();
        let want_pos = self.lay.n;
        let want_neg = self.lay.m();
        let mut delta_w = 0.0;
        let mut first = true;
        loop {
            self.kkt.clear();
            for i in 0..self.lay.n {
                self.kkt.add(self.lay.pos_var[i], self.lay.pos_var[i], sx[i] + delta_w + prox);
            }
            if let Some(h) = hess {
                for (k, &(a, b)) in self.lay.hess_pos.iter().enumerate() {
                    self.kkt.add(a, b, h[k]);
                }
            }
            for (k, &(a, b)) in self.lay.jac_pos.iter().enumerate() {
                self.kkt.add(a, b, jac[k]);
            }
            let mut row_diag = vec![0.0; self.lay.mi];
            for r in 0..self.lay.me {
                self.kkt.add(self.lay.pos_row[r], self.lay.pos_row[r], -DELTA_C);
            }
            for i in 0..self.lay.mi {
                let sig = sigma_s[i] + delta_w + prox;
                row_diag[i] = sig;
                let r = self.lay.me + i;
                self.kkt.add(self.lay.pos_row[r], self.lay.pos_row[r], -(1.0 / sig + DELTA_C));
            }
            let f = self.kkt.factor();
            if f.inertia.positive == want_pos && f.inertia.negative == want_neg && f.inertia.zero == 0 {
                if hess.is_some() {
                    self.last_delta_w = delta_w;
                }
                return Some((f, delta_w, row_diag));
            }
            delta_w = if first {
                first = false;
                if self.last_delta_w == 0.0 {
                    DELTA_W_INIT
                } else {
                    (self.last_delta_w / 3.0).max(1e-20)
                }
            } else if self.last_delta_w == 0.0 || delta_w < self.last_delta_w {
                delta_w * 100.0
            } else {
                delta_w * 8.0
            };
            if delta_w > DELTA_W_MAX {
                return None;
            }
        }
    }

    /// Solves the reduced system for given residuals.
    /// `rx`: barrier-gradient residual (n), `rs`: slack residual (mi),
    /// `rc`: constraint residual (m). Returns `(dx, ds, dy)`.
    fn solve_direction(
        &self,
        f: &Factorization,
        row_diag: &[f64],
        rx: &[f64],
        rs: &[f64],
        rc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, me, mi) = (self.lay.n, self.lay.me, self.lay.mi);
        let dim = self.kkt.dim();
        let mut rhs = vec![0.0; dim];
        for i in 0..n {
            rhs[self.lay.pos_var[i]] = -rx[i];
        }
        for r in 0..me {
            rhs[self.lay.pos_row[r]] = -rc[r];
        }
        for i in 0..mi {
            rhs[self.lay.pos_row[me + i]] = -rc[me + i] - rs[i] / row_diag[i];
        }
        let mut sol = rhs.clone();
        f.solve(&mut sol);
        // Iterative refinement against the assembled matrix.
        let mut resid = vec![0.0; dim];
        let scale = norm_inf(&rhs).max(1.0);
        for _ in 0..3 {
            self.kkt.mul(&sol, &mut resid);
            for k in 0..dim {
                resid[k] = rhs[k] - resid[k];
            }
            if norm_inf(&resid) <= 1e-12 * scale {
                break;
            }
            f.solve(&mut resid);
            for k in 0..dim {
                sol[k] += resid[k];
            }
        }
        let dx: Vec<f64> = (0..n).map(|i| sol[self.lay.pos_var[i]]).collect();
        let dy: Vec<f64> = (0..me + mi).map(|r| sol[self.lay.pos_row[r]]).collect();
        let ds: Vec<f64> = (0..mi).map(|i| (dy[me + i] - rs[i]) / row_diag[i]).collect();
        (dx, ds, dy)
    }

    fn bound_duals(&self, it: &Iterate, mu: f64, dx: &[f64], ds: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.lay.n;
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for i in 0..n {
            if self.has_l[i] {
                let gap = it.x[i] - self.xl[i];
                dzl[i] = mu / gap - it.zl[i] - it.zl[i] / gap * dx[i];
            }
            if self.has_u[i] {
                let gap = self.xu[i] - it.x[i];
                dzu[i] = mu / gap - it.zu[i] + it.zu[i] / gap * dx[i];
            }
        }
        let dvs = (0..self.lay.mi).map(|i| mu / it.s[i] - it.vs[i] - it.vs[i] / it.s[i] * ds[i]).collect();
        (dzl, dzu, dvs)
    }

    fn max_step_primal(&self, it: &Iterate, dx: &[f64], ds: &[f64], tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..self.lay.n {
            if self.has_l[i] && dx[i] < 0.0 {
                a = a.min(-tau * (it.x[i] - self.xl[i]) / dx[i]);
            }
            if self.has_u[i] && dx[i] > 0.0 {
                a = a.min(tau * (self.xu[i] - it.x[i]) / dx[i]);
            }
        }
        for i in 0..self.lay.mi {
            if ds[i] < 0.0 {
                a = a.min(-tau * it.s[i] / ds[i]);
            }
        }
        a
    }

    fn max_step_dual(&self, it: &Iterate, d: &Direction, tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        let pairs = [(&it.zl, &d.dzl), (&it.zu, &d.dzu), (&it.vs, &d.dvs)];
        for (z, dz) in pairs {
            for (zi, dzi) in z.iter().zip(dz.iter()) {
                if *dzi < 0.0 && *zi > 0.0 {
                    a = a.min(-tau * zi / dzi);
                }
            }
        }
        a
    }

    fn safeguard_duals(&self, it: &mut Iterate, mu: f64) {
        for i in 0..self.lay.n {
            if self.has_l[i] {
                let gap = it.x[i] - self.xl[i];
                it.zl[i] = it.zl[i].clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
            }
            if self.has_u[i] {
                let gap = self.xu[i] - it.x[i];
                it.zu[i] = it.zu[i].clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
            }
        }
        for i in 0..self.lay.mi {
            it.vs[i] = it.vs[i].clamp(mu / (KAPPA_SIGMA * it.s[i]), KAPPA_SIGMA * mu / it.s[i]);
        }
    }

    fn barrier_gradients(&self, ev: &Evaluated, it: &Iterate, mu: f64) -> (Vec<f64>, Vec<f64>) {
        // rx = ∇φ_μ + Jᵀy, rs = −y_g − μ/s.
        let mut rx = ev.grad.clone();
        for i in 0..self.lay.n {
            if self.has_l[i] {
                rx[i] -= mu / (it.x[i] - self.xl[i]);
            }
            if self.has_u[i] {
                rx[i] += mu / (self.xu[i] - it.x[i]);
            }
        }
        for (k, &(row, col)) in self.lay.jac.iter().enumerate() {
            rx[col] += ev.jac[k] * it.y[row];
        }
        let me = self.lay.me;
        let rs: Vec<f64> = (0..self.lay.mi).map(|i| -it.y[me + i] - mu / it.s[i]).collect();
        (rx, rs)
    }

    pub fn solve(&mut self, x0: &[f64]) -> IpmResult {
        let opts = self.opts;
        let mu_min = opts.compl_tol / 10.0;
        let mut mu = opts.mu_init;
        if opts.refresh_iterations > 0 {
            self.p.refresh(x0);
        }
        let mut it = self.initial_iterate(x0);
        let mut ev = self.evaluate(&it);
        let theta0 = norm_1(&ev.c);
        let theta_max = 1e4 * theta0.max(1.0);
        let mut theta_min = 1e-4 * theta0.max(1.0);
        let mut filter: Vec<(f64, f64)> = Vec::new();
        let mut status = IpmStatus::MaxIter;
        let mut iter = 0;

        while iter < opts.max_iter {
            if iter > 0 && iter <= opts.refresh_iterations && self.p.refresh(&it.x) {
                ev = self.evaluate(&it);
                filter.clear();
                theta_min = 1e-4 * norm_1(&ev.c).max(1.0);
            }
            let (d0, p0, c0) = self.errors(&ev, &it, 0.0);
            if d0 <= opts.tol && p0 <= opts.tol && c0 <= opts.compl_tol {
                status = IpmStatus::Converged;
                break;
            }
            loop {
                let (dm, pm, cm) = self.errors(&ev, &it, mu);
                let e_mu = dm.max(pm).max(cm);
                if e_mu <= KAPPA_EPS * mu && mu > mu_min {
                    mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
                    filter.clear();
                } else {
                    break;
                }
            }
            let tau = (1.0 - mu).max(0.99);

            self.p.hessian_values(&it.x, 1.0, &it.y, &mut self.hess_vals);
            let hess = std::mem::take(&mut self.hess_vals);
            let factored = self.factor(&it, &ev.jac, Some(&hess), 0.0);
            self.hess_vals = hess;
            let Some((fact, _dw, row_diag)) = factored else {
                // No usable Newton system; treat as a failed line search.
                match self.feasibility_phase(&mut it, mu, &mut iter, &filter) {
                    Some(true) => {
                        ev = self.evaluate(&it);
                        filter.clear();
                        continue;
                    }
                    _ => {
                        status = IpmStatus::Infeasible;
                        break;
                    }
                }
            };
            let (rx, rs) = self.barrier_gradients(&ev, &it, mu);
            let (dx, ds, dy) = self.solve_direction(&fact, &row_diag, &rx, &rs, &ev.c);
            let (dzl, dzu, dvs) = self.bound_duals(&it, mu, &dx, &ds);
            let dir = Direction { dx, ds, dy, dzl, dzu, dvs };

            let alpha_max = self.max_step_primal(&it, &dir.dx, &dir.ds, tau);
            let alpha_z = self.max_step_dual(&it, &dir, tau);

            let theta = norm_1(&ev.c);
            let phi = self.barrier(ev.f, &it.x, &it.s, mu);
            let (grad_phi_x, grad_phi_s) = {
                let mut gx = ev.grad.clone();
                for i in 0..self.lay.n {
                    if self.has_l[i] {
                        gx[i] -= mu / (it.x[i] - self.xl[i]);
                    }
                    if self.has_u[i] {
                        gx[i] += mu / (self.xu[i] - it.x[i]);
                    }
                }
                let gs: Vec<f64> = it.s.iter().map(|s| -mu / s).collect();
                (gx, gs)
            };
            let dphi = dot(&grad_phi_x, &dir.dx) + dot(&grad_phi_s, &dir.ds);

            let alpha_min = if dphi < 0.0 {
                GAMMA_ALPHA * GAMMA_THETA.min(GAMMA_PHI * theta / -dphi).min(theta.powf(S_THETA) / (-dphi).powf(S_PHI))
            } else {
                GAMMA_ALPHA * GAMMA_THETA
            };

            let mut alpha = alpha_max;
            let mut accepted: Option<(Vec<f64>, Vec<f64>, bool)> = None;
            let mut first_trial = true;
            while alpha >= alpha_min {
                let xt: Vec<f64> = (0..self.lay.n).map(|i| it.x[i] + alpha * dir.dx[i]).collect();
                let st: Vec<f64> = (0..self.lay.mi).map(|i| it.s[i] + alpha * dir.ds[i]).collect();
                let (ft, ct) = self.trial_values(&xt, &st);
                let theta_t = norm_1(&ct);
                let phi_t = self.barrier(ft, &xt, &st, mu);
                if let Some(f_type) =
                    self.acceptable(theta, phi, theta_t, phi_t, alpha, dphi, theta_min, theta_max, &filter)
                {
                    accepted = Some((xt, st, f_type));
                    break;
                }
                if first_trial && theta_t >= theta {
                    if let Some(found) = self.second_order_correction(
                        &it, &fact, &row_diag, &rx, &rs, &ev.c, &ct, alpha, tau, theta, phi, dphi, theta_min,
                        theta_max, &filter, mu,
                    ) {
                        accepted = Some(found);
                        break;
                    }
                }
                first_trial = false;
                alpha *= 0.5;
            }

            match accepted {
                Some((xt, st, f_type)) => {
                    if !f_type {
                        filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                    }
                    let alpha_y = alpha;
                    it.x = xt;
                    it.s = st;
                    for r in 0..self.lay.m() {
                        it.y[r] += alpha_y * dir.dy[r];
                    }
                    for i in 0..self.lay.n {
                        it.zl[i] += alpha_z * dir.dzl[i];
                        it.zu[i] += alpha_z * dir.dzu[i];
                    }
                    for i in 0..self.lay.mi {
                        it.vs[i] += alpha_z * dir.dvs[i];
                    }
                    self.safeguard_duals(&mut it, mu);
                    ev = self.evaluate(&it);
                    iter += 1;
                }
                None => {
                    iter += 1;
                    filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                    match self.feasibility_phase(&mut it, mu, &mut iter, &filter) {
                        Some(true) => {
                            ev = self.evaluate(&it);
                            filter.clear();
                        }
                        Some(false) => {
                            ev = self.evaluate(&it);
                            filter.clear();
                        }
                        None => {
                            status = IpmStatus::Infeasible;
                            break;
                        }
                    }
                }
            }
        }
        if status == IpmStatus::MaxIter {
            let (d0, p0, c0) = self.errors(&ev, &it, 0.0);
            if d0 <= opts.tol && p0 <= opts.tol && c0 <= opts.compl_tol {
                status = IpmStatus::Converged;
            }
        }
        let (dual, primal, _) = self.errors(&ev, &it, 0.0);
        IpmResult {
            objective: ev.f,
            x: it.x,
            y: it.y,
            status,
            iterations: iter,
            primal_infeasibility: primal,
            dual_infeasibility: dual,
        }
    }

    /// Returns `Some(is_f_type_step)` when the trial point is accepted.
    #[allow(clippy::too_many_arguments)]
    fn acceptable(
        &self,
        theta: f64,
        phi: f64,
        theta_t: f64,
        phi_t: f64,
        alpha: f64,
        dphi: f64,
        theta_min: f64,
        theta_max: f64,
        filter: &[(f64, f64)],
    ) -> Option<bool> {
        if !theta_t.is_finite() || !phi_t.is_finite() || theta_t > theta_max {
            return None;
        }
        if filter.iter().any(|&(tf, pf)| theta_t >= tf && phi_t >= pf) {
            return None;
        }
        let switching = dphi < 0.0 && alpha * (-dphi).powf(S_PHI) > theta.powf(S_THETA);
        if theta <= theta_min && switching {
            if phi_t <= phi + ETA_PHI * alpha * dphi {
                return Some(true);
            }
            return None;
        }
        if theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta {
            return Some(false);
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn second_order_correction(
        &self,
        it: &Iterate,
        fact: &Factorization,
        row_diag: &[f64],
        rx: &[f64],
        rs: &[f64],
        c0: &[f64],
        ct_first: &[f64],
        alpha0: f64,
        tau: f64,
        theta: f64,
        phi: f64,
        dphi: f64,
        theta_min: f64,
        theta_max: f64,
        filter: &[(f64, f64)],
        mu: f64,
    ) -> Option<(Vec<f64>, Vec<f64>, bool)> {
        let mut c_soc: Vec<f64> = c0.iter().zip(ct_first).map(|(a, b)| alpha0 * a + b).collect();
        let mut theta_prev = norm_1(ct_first);
        for _ in 0..MAX_SOC {
            let (dx, ds, _) = self.solve_direction(fact, row_diag, rx, rs, &c_soc);
            let a = self.max_step_primal(it, &dx, &ds, tau);
            let xt: Vec<f64> = (0..self.lay.n).map(|i| it.x[i] + a * dx[i]).collect();
            let st: Vec<f64> = (0..self.lay.mi).map(|i| it.s[i] + a * ds[i]).collect();
            let (ft, ct) = self.trial_values(&xt, &st);
            let theta_t = norm_1(&ct);
            let phi_t = self.barrier(ft, &xt, &st, mu);
            if let Some(f_type) =
                self.acceptable(theta, phi, theta_t, phi_t, alpha0, dphi, theta_min, theta_max, filter)
            {
                return Some((xt, st, f_type));
            }
            if theta_t > 0.99 * theta_prev {
                return None;
            }
            theta_prev = theta_t;
            for (cs, c) in c_soc.iter_mut().zip(&ct) {
                *cs = a * *cs + c;
            }
        }
        None
    }

    /// Regularized Gauss-Newton steps on the constraint violation that keep
    /// the bounds strictly feasible. Returns `Some(true)` when the point
    /// becomes acceptable to the filter, `Some(false)` when progress stalls
    /// at a small violation, and `None` when the problem looks infeasible.
    fn feasibility_phase(
        &mut self,
        it: &mut Iterate,
        mu: f64,
        iter: &mut usize,
        filter: &[(f64, f64)],
    ) -> Option<bool> {
        let tau = (1.0 - mu).max(0.99);
        let mut ev = self.evaluate(it);
        let theta_start = norm_1(&ev.c);
        let mut stall = 0;
        let zero_x = vec![0.0; self.lay.n];
        let zero_s = vec![0.0; self.lay.mi];
        while *iter < self.opts.max_iter {
            let theta = norm_1(&ev.c);
            let phi = self.barrier(ev.f, &it.x, &it.s, mu);
            let acceptable = !filter.iter().any(|&(tf, pf)| theta >= tf && phi >= pf);
            if acceptable && theta <= 0.9 * theta_start {
                return Some(true);
            }
            if norm_inf(&ev.c) <= 0.1 * self.opts.tol {
                return Some(false);
            }
            let prox = (1e-4 * theta.sqrt()).max(1e-8);
            let (fact, _, row_diag) = self.factor(it, &ev.jac, None, prox)?;
            let (dx, ds, _) = self.solve_direction(&fact, &row_diag, &zero_x, &zero_s, &ev.c);
            let amax = self.max_step_primal(it, &dx, &ds, tau);
            let mut a = amax;
            let mut moved = false;
            while a > 1e-8 {
                let xt: Vec<f64> = (0..self.lay.n).map(|i| it.x[i] + a * dx[i]).collect();
                let st: Vec<f64> = (0..self.lay.mi).map(|i| it.s[i] + a * ds[i]).collect();
                let (_, ct) = self.trial_values(&xt, &st);
                if norm_1(&ct) < (1.0 - 1e-4 * a) * theta {
                    it.x = xt;
                    it.s = st;
                    moved = true;
                    break;
                }
                a *= 0.5;
            }
            *iter += 1;
            self.safeguard_duals(it, mu);
            ev = self.evaluate(it);
            let theta_new = norm_1(&ev.c);
            if !moved || theta_new > 0.999 * theta {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= 3 {
                return if norm_inf(&ev.c) <= self.opts.infeasibility_threshold { Some(false) } else { None };
            }
        }
        if norm_inf(&ev.c) <= self.opts.infeasibility_threshold {
            Some(false)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min (x0−1)² + (x1−2)²  s.t. x0 + x1 = 1, x0 ≥ 0, x1 ≤ 0.8, x0·x1 ≥ −1.
    struct Toy;

    impl NlpFunctions for Toy {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_eq(&self) -> usize {
            1
        }
        fn num_ineq(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, 0.8])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2)
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 2.0 * (x[0] - 1.0);
            g[1] = 2.0 * (x[1] - 2.0);
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] + x[1] - 1.0;
            c[1] = x[0] * x[1] + 1.0;
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        }
        fn jacobian_values(&self, x: &[f64], v: &mut [f64]) {
            v.copy_from_slice(&[1.0, 1.0, x[1], x[0]]);
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (1, 1), (1, 0)]
        }
        fn hessian_values(&self, _x: &[f64], of: f64, y: &[f64], v: &mut [f64]) {
            v.copy_from_slice(&[2.0 * of, 2.0 * of, y[1]]);
        }
        fn kkt_order(&self) -> KktOrder {
            KktOrder {
                banded: vec![KktSlot::Var(0), KktSlot::Var(1), KktSlot::Row(0), KktSlot::Row(1)],
                border_vars: vec![],
            }
        }
    }

    #[test]
    fn toy_problem() {
        let mut p = Toy;
        let r = InteriorPoint::new(&mut p, IpmOptions::default()).solve(&[0.5, 0.5]);
        assert_eq!(r.status, IpmStatus::Converged);
        // Projection of (1, 2) onto x0 + x1 = 1 is (0, 1), but x1 ≤ 0.8 binds.
        assert!((r.x[0] - 0.2).abs() < 1e-6, "{:?}", r.x);
        assert!((r.x[1] - 0.8).abs() < 1e-6);
    }

    /// x0 + x1 = 3 with x ≤ 1 has no solution.
    struct Infeasible;

    impl NlpFunctions for Infeasible {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_eq(&self) -> usize {
            1
        }
        fn num_ineq(&self) -> usize {
            0
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![-1.0, -1.0], vec![1.0, 1.0])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] * x[0] + x[1] * x[1]
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] + x[1] - 3.0;
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (0, 1)]
        }
        fn jacobian_values(&self, _x: &[f64], v: &mut [f64]) {
            v.copy_from_slice(&[1.0, 1.0]);
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (1, 1)]
        }
        fn hessian_values(&self, _x: &[f64], of: f64, _y: &[f64], v: &mut [f64]) {
            v.copy_from_slice(&[2.0 * of, 2.0 * of]);
        }
        fn kkt_order(&self) -> KktOrder {
            KktOrder { banded: vec![KktSlot::Var(0), KktSlot::Var(1), KktSlot::Row(0)], border_vars: vec![] }
        }
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = Infeasible;
        let r = InteriorPoint::new(&mut p, IpmOptions::default()).solve(&[0.0, 0.0]);
        assert_eq!(r.status, IpmStatus::Infeasible);
    }
}
