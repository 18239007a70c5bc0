//! Truncated spatial-dynamics system in the traveling coordinate `y`:
//! integration with Hamiltonian and charge monitors, bounded inversion of the
//! hyperbolic modes, the leading-order ansatz, PDE residuals, reversible
//! shooting and tail measurement.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::cme::{CmeParams, Soliton};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    canonical_rhs, cubic, eval_h, from_normal, gauge_charge, normal_rhs, to_normal, trilinear, CanonicalState, Model,
    NormalState,
};
use crate::io::Csv;
use crate::ode::{integrate_at, Dopri5, OdeOptions};
use crate::potential::PotentialSpec;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Path amplitude, relative to the soliton peak, taken as divergence of the sweeps.
const DIVERGED: f64 = 100.0;
const BLOW_UP: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct SpatialSystem {
    pub model: Model,
}

pub fn build_system(params: &CmeParams, potential: &PotentialSpec, m_max: i32, eps: f64) -> Result<SpatialSystem> {
    Ok(SpatialSystem { model: Model::new(*params, potential.clone(), m_max, eps)? })
}

impl SpatialSystem {
    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rhs(&self, st: &CanonicalState) -> CanonicalState {
        canonical_rhs(&self.model, st)
    }

    pub fn hamiltonian(&self, st: &CanonicalState) -> f64 {
        eval_h(&self.model, st)
    }

    pub fn charge(&self, st: &CanonicalState) -> f64 {
        gauge_charge(st)
    }

    fn rhs_flat(&self, y: &[C64], out: &mut [C64]) {
        let r = canonical_rhs(&self.model, &CanonicalState::from_flat(y));
        let k = self.len();
        out[..k].copy_from_slice(&r.psi);
        out[k..].copy_from_slice(&r.phi);
    }
}

/// Samples of a spatial trajectory together with per-step monitors.
#[derive(Clone, Debug)]
pub struct SpatialTrajectory {
    pub model: Model,
    pub ys: Vec<f64>,
    pub states: Vec<CanonicalState>,
    pub monitor_y: Vec<f64>,
    pub monitor_h: Vec<f64>,
    pub monitor_q: Vec<f64>,
}

impl SpatialTrajectory {
    fn from_states(model: Model, ys: Vec<f64>, states: Vec<CanonicalState>) -> Self {
        let monitor_h = states.iter().map(|s| eval_h(&model, s)).collect();
        let monitor_q = states.iter().map(gauge_charge).collect();
        SpatialTrajectory { monitor_y: ys.clone(), model, ys, states, monitor_h, monitor_q }
    }

    /// Largest `|H(y) - H(y0)|` over the monitor.
    pub fn h_drift(&self) -> f64 {
        drift(&self.monitor_h)
    }

    pub fn q_drift(&self) -> f64 {
        drift(&self.monitor_q)
    }

    /// CSV with columns `y`, `abs_psi_<m>` per mode, `H`, `Q`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["y".to_string()];
        header.extend(self.model.modes.iter().map(|m| format!("abs_psi_{m}")));
        header.push("H".into());
        header.push("Q".into());
        let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for (y, st) in self.ys.iter().zip(&self.states) {
            let mut row = vec![*y];
            row.extend(st.psi.iter().map(|z| z.norm()));
            row.push(eval_h(&self.model, st));
            row.push(gauge_charge(st));
            csv.row_f64(&row);
        }
        csv.into_string()
    }

    /// Extends a trajectory starting at `y = 0` to negative `y` by
    /// `(psi, phi)(-y) = (conj psi, -conj phi)(y)`.
    pub fn reflected(&self) -> Result<SpatialTrajectory> {
        if self.ys.first() != Some(&0.0) {
            return Err(Error::invalid("reflection needs a trajectory starting at y = 0"));
        }
        let mut ys: Vec<f64> = self.ys.iter().skip(1).rev().map(|y| -y).collect();
        let mut states: Vec<CanonicalState> =
            self.states.iter().skip(1).rev().map(crate::hamiltonian::reverse).collect();
        ys.extend_from_slice(&self.ys);
        states.extend(self.states.iter().cloned());
        Ok(SpatialTrajectory::from_states(self.model.clone(), ys, states))
    }
}

fn drift(v: &[f64]) -> f64 {
    v.first().map_or(0.0, |&v0| v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max))
}

/// Adaptive integration over `y_range`, sampling `samples` equispaced points
/// and recording `H` and the gauge charge after every accepted step.
pub fn integrate_spatial(
    sys: &SpatialSystem,
    y_range: (f64, f64),
    state0: &CanonicalState,
    tol: f64,
    samples: usize,
) -> Result<SpatialTrajectory> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if state0.psi.len() != sys.len() || state0.phi.len() != sys.len() {
        return Err(Error::invalid(format!("initial state must have {} modes", sys.len())));
    }
    let (y0, y1) = y_range;
    let ns = samples.max(2);
    let ys: Vec<f64> = (0..ns).map(|i| y0 + (y1 - y0) * i as f64 / (ns - 1) as f64).collect();
    let opts = OdeOptions { atol: tol * 1e-3, ..OdeOptions::with_tol(tol) };
    let flat0 = state0.to_flat();
    let mut solver = Dopri5::new(|_y: f64, s: &[C64], d: &mut [C64]| sys.rhs_flat(s, d), y0, &flat0, y1, opts)?;
    let mut traj = SpatialTrajectory {
        model: sys.model.clone(),
        ys: Vec::with_capacity(ns),
        states: Vec::with_capacity(ns),
        monitor_y: vec![y0],
        monitor_h: vec![eval_h(&sys.model, state0)],
        monitor_q: vec![gauge_charge(state0)],
    };
    let dir = if y1 >= y0 { 1.0 } else { -1.0 };
    let mut next = 0;
    while next < ns && ys[next] == y0 {
        traj.ys.push(y0);
        traj.states.push(state0.clone());
        next += 1;
    }
    let mut buf = vec![ZERO; flat0.len()];
    while let Some(step) = solver.step()? {
        while next < ns && (ys[next] - step.t1()) * dir <= 0.0 {
            step.eval_into(ys[next], &mut buf);
            traj.ys.push(ys[next]);
            traj.states.push(CanonicalState::from_flat(&buf));
            next += 1;
        }
        let st = CanonicalState::from_flat(solver.y());
        let norm = st.norm();
        if !norm.is_finite() || norm > BLOW_UP {
            return Err(Error::Integration {
                at: solver.t(),
                reason: format!("state norm {norm:e} exceeds {BLOW_UP:e}"),
            });
        }
        traj.monitor_y.push(solver.t());
        traj.monitor_h.push(eval_h(&sys.model, &st));
        traj.monitor_q.push(gauge_charge(&st));
    }
    while next < ns {
        traj.ys.push(ys[next]);
        traj.states.push(CanonicalState::from_flat(solver.y()));
        next += 1;
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformGrid {
    pub y0: f64,
    pub h: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(y0: f64, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() || !y0.is_finite() || n < 2 {
            return Err(Error::invalid(format!("grid needs h > 0 and at least 2 points (h = {h}, n = {n})")));
        }
        Ok(UniformGrid { y0, h, n })
    }

    /// Grid on `[a, b]` with spacing at most `h`.
    pub fn span(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::invalid(format!("empty interval [{a}, {b}]")));
        }
        let n = ((b - a) / h).ceil() as usize + 1;
        UniformGrid::new(a, (b - a) / (n - 1) as f64, n)
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + self.h * j as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.y(j)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct GreenSolution {
    pub psi: Vec<C64>,
    pub dpsi: Vec<C64>,
}

/// `(1 - e^{-x})/x` and `(1 - e^{-x}(1 + x))/x^2`.
fn phi12(x: C64) -> (C64, C64) {
    if x.norm() < 0.5 {
        let mut p1 = ZERO;
        let mut p2 = ZERO;
        let mut pow = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..20 {
            fact *= (k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            p1 += sign * pow / fact;
            p2 += sign * pow * (k + 1) as f64 / (fact * (k + 2) as f64);
            pow *= x;
        }
        (p1, p2)
    } else {
        let e = (-x).exp();
        ((1.0 - e) / x, (1.0 - e * (1.0 + x)) / (x * x))
    }
}

/// One step of `T(y) = int_{-inf}^y e^{-lam (y - s)} F(s) ds` with `F` linear
/// on the step: `T_j = d T_{j-1} + w_prev F_{j-1} + w_cur F_j`.
fn exp_weights(lam: C64, h: f64) -> (C64, C64, C64) {
    let (p1, p2) = phi12(lam * h);
    ((-lam * h).exp(), h * p2, h * (p1 - p2))
}

/// Bounded solution of `psi'' + 2 i alpha psi' - (alpha^2 + beta^2) psi = -F`,
/// i.e. `psi = e^{-i alpha y} phi` with `(beta^2 - d^2/dy^2) phi = F e^{i alpha y}`.
/// Product integration with the exponential kernel and piecewise-linear `F`.
pub fn green_invert(beta: f64, alpha: f64, f: &[C64], grid: &UniformGrid) -> Result<GreenSolution> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid("alpha must be finite"));
    }
    if f.len() != grid.n {
        return Err(Error::invalid(format!("forcing has {} samples, grid has {}", f.len(), grid.n)));
    }
    let h = grid.h;
    let n = grid.n;
    let lam_l = C64::new(beta, alpha);
    let lam_r = C64::new(beta, -alpha);
    let (dl, wl_prev, wl_cur) = exp_weights(lam_l, h);
    let (dr, wr_prev, wr_cur) = exp_weights(lam_r, h);
    let mut t = vec![ZERO; n];
    for j in 1..n {
        t[j] = dl * t[j - 1] + wl_prev * f[j - 1] + wl_cur * f[j];
    }
    let mut u = vec![ZERO; n];
    for j in (0..n - 1).rev() {
        u[j] = dr * u[j + 1] + wr_prev * f[j + 1] + wr_cur * f[j];
    }
    let inv = 1.0 / (2.0 * beta);
    Ok(GreenSolution {
        psi: (0..n).map(|j| (t[j] + u[j]) * inv).collect(),
        dpsi: (0..n).map(|j| (-lam_l * t[j] + lam_r * u[j]) * inv).collect(),
    })
}

/// `(beta, alpha)` of a hyperbolic mode.
fn hyperbolic_rates(model: &Model, i: usize) -> (f64, f64) {
    let c = model.params.c;
    ((-model.d(i)).sqrt() / 2.0, (model.m(i) as f64 - c) / 2.0)
}

fn min_beta(model: &Model) -> Option<f64> {
    (0..model.len()).filter(|&i| !model.is_center(i)).map(|i| hyperbolic_rates(model, i).0).reduce(f64::min)
}

fn check_soliton(sys: &SpatialSystem, sol: &Soliton) -> Result<()> {
    if sol.params != sys.model.params {
        return Err(Error::invalid("soliton parameters differ from the system parameters"));
    }
    Ok(())
}

/// Leading-order state on `grid`: the resonant pair from the soliton
/// (`psi_n = a(eps y)`, `psi_{-n} = b(eps y)`), hyperbolic modes from the bounded
/// inversion of their `O(eps)` forcing, and the remaining center modes from
/// their quasi-static `O(eps)` response.
pub fn leading_order_ansatz(sys: &SpatialSystem, sol: &Soliton, grid: &UniformGrid) -> Result<Vec<CanonicalState>> {
    check_soliton(sys, sol)?;
    let model = &sys.model;
    let k = model.len();
    let (ip, im) = model.resonant();
    let (n, c, eps, om) = (model.params.nf(), model.params.c, model.eps, model.params.omega);
    let margin = min_beta(model).map_or(0, |b| (40.0 / b / grid.h).ceil() as usize);
    let ext = UniformGrid::new(grid.y0 - margin as f64 * grid.h, grid.h, grid.n + 2 * margin)?;
    let sg = model.params.sigma as f64;
    let mut states = Vec::with_capacity(ext.n);
    let mut forcing = Vec::with_capacity(ext.n);
    let mut dforcing = Vec::with_capacity(ext.n);
    for j in 0..ext.n {
        let y = ext.y(j);
        let pt = sol.profile(eps * y)?;
        let mut st = CanonicalState::zeros(k);
        st.psi[ip] = pt.a;
        st.psi[im] = pt.b;
        st.phi[ip] = eps * pt.da - 0.5 * I * (c - n) * pt.a;
        st.phi[im] = eps * pt.db - 0.5 * I * (c + n) * pt.b;
        let mut v = vec![ZERO; k];
        v[ip] = pt.da;
        v[im] = pt.db;
        let n3 = cubic(&st.psi);
        let dn: Vec<C64> = {
            let (a, b, cc) =
                (trilinear(&v, &st.psi, &st.psi), trilinear(&st.psi, &v, &st.psi), trilinear(&st.psi, &st.psi, &v));
            (0..k).map(|i| a[i] + b[i] + cc[i]).collect()
        };
        let g: Vec<C64> =
            (0..k).map(|i| model.w(i, ip) * st.psi[ip] + model.w(i, im) * st.psi[im] + sg * n3[i]).collect();
        let dg: Vec<C64> = (0..k).map(|i| model.w(i, ip) * v[ip] + model.w(i, im) * v[im] + sg * dn[i]).collect();
        states.push(st);
        forcing.push(g);
        dforcing.push(dg);
    }
    for i in 0..k {
        if i == ip || i == im {
            continue;
        }
        let m = model.m(i) as f64;
        let rot = 0.5 * I * (c - m);
        if model.is_center(i) {
            let den = (n * n - m * m) / 4.0 + eps * om;
            for j in 0..ext.n {
                let psi = eps * forcing[j][i] / den;
                let dpsi = eps * eps * dforcing[j][i] / den;
                states[j].psi[i] = psi;
                states[j].phi[i] = dpsi - rot * psi;
            }
        } else {
            let (beta, alpha) = hyperbolic_rates(model, i);
            let f: Vec<C64> = (0..ext.n).map(|j| -eps * forcing[j][i]).collect();
            let g = green_invert(beta, alpha, &f, &ext)?;
            for j in 0..ext.n {
                states[j].psi[i] = g.psi[j];
                states[j].phi[i] = g.dpsi[j] - rot * g.psi[j];
            }
        }
    }
    Ok(states.into_iter().skip(margin).take(grid.n).collect())
}

/// Physical field `sqrt(eps) sum_m psi_m(y) e^{i m x / 2}` on `nx` points of `[0, 4 pi)`.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub nx: usize,
    pub y: UniformGrid,
    /// Row-major by `y`.
    pub values: Vec<C64>,
}

impl FieldGrid {
    pub fn x(&self, i: usize) -> f64 {
        4.0 * std::f64::consts::PI * i as f64 / self.nx as f64
    }
}

pub fn field_from_modes(model: &Model, states: &[CanonicalState], grid: &UniformGrid, nx: usize) -> Result<FieldGrid> {
    if states.len() != grid.n {
        return Err(Error::invalid(format!("{} states for {} grid points", states.len(), grid.n)));
    }
    if nx < 4 {
        return Err(Error::invalid("need at least 4 x points"));
    }
    let scale = model.eps.sqrt();
    let phases: Vec<Vec<C64>> = (0..nx)
        .map(|ix| {
            let x = 4.0 * std::f64::consts::PI * ix as f64 / nx as f64;
            model.modes.iter().map(|m| C64::from_polar(1.0, m as f64 * x / 2.0)).collect()
        })
        .collect();
    let mut values = Vec::with_capacity(nx * grid.n);
    for st in states {
        for ph in &phases {
            values.push(scale * st.psi.iter().zip(ph).map(|(p, e)| p * e).sum::<C64>());
        }
    }
    Ok(FieldGrid { nx, y: *grid, values })
}

/// Sup-norm over interior rows of
/// `(omega - i c d_y + d_x^2 + 2 d_x d_y + d_y^2) psi - eps W psi - sigma |psi|^2 psi`,
/// with `omega = n^2/4 + eps Omega`.
pub fn pde_residual(field: &FieldGrid, params: &CmeParams, potential: &PotentialSpec, eps: f64) -> Result<f64> {
    let (nx, ny) = (field.nx, field.y.n);
    if ny < 5 {
        return Err(Error::invalid("need at least 5 y rows for fourth-order differences"));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nx);
    let inv = planner.plan_fft_inverse(nx);
    let kx: Vec<f64> = (0..nx)
        .map(|j| {
            let j = if j <= nx / 2 { j as f64 } else { j as f64 - nx as f64 };
            j / 2.0
        })
        .collect();
    let mut dx = vec![ZERO; nx * ny];
    let mut dxx = vec![ZERO; nx * ny];
    for r in 0..ny {
        let mut spec: Vec<C64> = field.values[r * nx..(r + 1) * nx].to_vec();
        fwd.process(&mut spec);
        let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let edge = (nx / 2 - 1..=nx / 2 + 1).map(|j| spec[j].norm()).fold(0.0, f64::max);
        if peak > 0.0 && edge > 1e-10 * peak {
            return Err(Error::invalid(format!("x grid of {nx} points is too coarse for the mode content")));
        }
        let mut s1: Vec<C64> = spec.iter().zip(&kx).map(|(z, k)| z * I * *k / nx as f64).collect();
        let mut s2: Vec<C64> = spec.iter().zip(&kx).map(|(z, k)| -z * k * k / nx as f64).collect();
        inv.process(&mut s1);
        inv.process(&mut s2);
        dx[r * nx..(r + 1) * nx].copy_from_slice(&s1);
        dxx[r * nx..(r + 1) * nx].copy_from_slice(&s2);
    }
    let h = field.y.h;
    let omega = params.nf().powi(2) / 4.0 + eps * params.omega;
    let sg = params.sigma as f64;
    let d1 = |v: &[C64], r: usize, i: usize| {
        (v[(r - 2) * nx + i] - 8.0 * v[(r - 1) * nx + i] + 8.0 * v[(r + 1) * nx + i] - v[(r + 2) * nx + i]) / (12.0 * h)
    };
    let d2 = |v: &[C64], r: usize, i: usize| {
        (-v[(r - 2) * nx + i] + 16.0 * v[(r - 1) * nx + i] - 30.0 * v[r * nx + i] + 16.0 * v[(r + 1) * nx + i]
            - v[(r + 2) * nx + i])
            / (12.0 * h * h)
    };
    let w: Vec<f64> = (0..nx).map(|i| potential.evaluate(field.x(i))).collect();
    let mut sup: f64 = 0.0;
    for r in 2..ny - 2 {
        for i in 0..nx {
            let p = field.values[r * nx + i];
            let res = omega * p - I * params.c * d1(&field.values, r, i)
                + dxx[r * nx + i]
                + 2.0 * d1(&dx, r, i)
                + d2(&field.values, r, i)
                - eps * w[i] * p
                - sg * p.norm_sqr() * p;
            sup = sup.max(res.norm());
        }
    }
    Ok(sup)
}

/// Canonical states on a uniform grid with their `y` derivatives, for cubic
/// Hermite interpolation.
struct GridPath {
    grid: UniformGrid,
    k: usize,
    x: Vec<C64>,
    dx: Vec<C64>,
}

impl GridPath {
    fn new(model: &Model, grid: UniformGrid, states: &[CanonicalState]) -> Self {
        let k = model.len();
        let mut x = Vec::with_capacity(grid.n * 2 * k);
        for s in states {
            x.extend(s.to_flat());
        }
        let mut p = GridPath { grid, k, x, dx: vec![ZERO; grid.n * 2 * k] };
        p.refresh(model);
        p
    }

    fn refresh(&mut self, model: &Model) {
        let w = 2 * self.k;
        for j in 0..self.grid.n {
            let r = canonical_rhs(model, &CanonicalState::from_flat(&self.x[j * w..(j + 1) * w]));
            self.dx[j * w..j * w + self.k].copy_from_slice(&r.psi);
            self.dx[j * w + self.k..(j + 1) * w].copy_from_slice(&r.phi);
        }
    }

    fn state(&self, j: usize) -> CanonicalState {
        let w = 2 * self.k;
        CanonicalState::from_flat(&self.x[j * w..(j + 1) * w])
    }

    fn set(&mut self, j: usize, st: &CanonicalState) {
        let w = 2 * self.k;
        self.x[j * w..(j + 1) * w].copy_from_slice(&st.to_flat());
    }

    fn eval(&self, y: f64) -> CanonicalState {
        let g = &self.grid;
        let s = ((y - g.y0) / g.h).clamp(0.0, (g.n - 1) as f64);
        let j = (s.floor() as usize).min(g.n - 2);
        let t = s - j as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = (t3 - 2.0 * t2 + t) * g.h;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = (t3 - t2) * g.h;
        let w = 2 * self.k;
        let (a, b) = (j * w, (j + 1) * w);
        let v: Vec<C64> = (0..w)
            .map(|i| h00 * self.x[a + i] + h10 * self.dx[a + i] + h01 * self.x[b + i] + h11 * self.dx[b + i])
            .collect();
        CanonicalState::from_flat(&v)
    }
}

#[derive(Clone, Debug)]
pub struct ShootOptions {
    /// Spacing of the storage grid.
    pub h: f64,
    /// Stop when successive sweeps differ by less than this (sup over modes and grid).
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of the inner integrations.
    pub ode_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { h: 0.01, tol: 1e-7, max_iter: 40, ode_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShootSummary {
    pub y_max: f64,
    pub iterations: usize,
    pub change: f64,
    pub symmetry_defect: f64,
    pub sup_norm: f64,
    pub soliton_sup: f64,
}

#[derive(Clone, Debug)]
pub struct ShootResult {
    /// Trajectory on `[0, y_max]`; see [`SpatialTrajectory::reflected`] for the full line.
    pub trajectory: SpatialTrajectory,
    pub summary: ShootSummary,
}

#[derive(Clone, Copy)]
struct Comp {
    i: usize,
    plus: bool,
}

fn get(ns: &NormalState, c: Comp) -> C64 {
    if c.plus {
        ns.cp[c.i]
    } else {
        ns.cm[c.i]
    }
}

fn put(ns: &mut NormalState, c: Comp, v: C64) {
    if c.plus {
        ns.cp[c.i] = v
    } else {
        ns.cm[c.i] = v
    }
}

/// Deviation of a normal state from the reversibility section: `Im c` for
/// center components and `c+ - conj c-` for hyperbolic modes.
pub fn section_defect(model: &Model, ns: &NormalState) -> f64 {
    (0..model.len())
        .map(|i| {
            if model.is_center(i) {
                ns.cp[i].im.abs().max(ns.cm[i].im.abs())
            } else {
                (ns.cp[i] - ns.cm[i].conj()).norm()
            }
        })
        .fold(0.0, f64::max)
}

/// Nearest point of the reversibility section.
pub fn project_to_section(model: &Model, ns: &NormalState) -> NormalState {
    let mut out = ns.clone();
    for i in 0..model.len() {
        if model.is_center(i) {
            out.cp[i] = C64::new(ns.cp[i].re, 0.0);
            out.cm[i] = C64::new(ns.cm[i].re, 0.0);
        } else {
            let avg = 0.5 * (ns.cp[i] + ns.cm[i].conj());
            out.cp[i] = avg;
            out.cm[i] = avg.conj();
        }
    }
    out
}

/// Linear part at the origin of the normal-coordinate vector field restricted
/// to the components `block`.
fn block_linearisation(model: &Model, block: &[Comp]) -> DMatrix<C64> {
    let k = model.len();
    let nb = block.len();
    let mut l = DMatrix::zeros(nb, nb);
    let h = 1e-3;
    for (col, &c) in block.iter().enumerate() {
        let eval = |t: f64| {
            let mut ns = NormalState::zeros(k);
            put(&mut ns, c, C64::new(t, 0.0));
            normal_rhs(model, &ns)
        };
        let (p1, m1, p2, m2) = (eval(h), eval(-h), eval(2.0 * h), eval(-2.0 * h));
        for (row, &r) in block.iter().enumerate() {
            l[(row, col)] = (8.0 * (get(&p1, r) - get(&m1, r)) - (get(&p2, r) - get(&m2, r))) / (12.0 * h);
        }
    }
    l
}

/// Eigenvalues and unit eigenvectors (as columns) of a complex matrix.
fn eigen_decompose(a: &DMatrix<C64>) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("Schur decomposition did not converge"))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let mut vecs = DMatrix::zeros(n, n);
    let mut lam = Vec::with_capacity(n);
    for kk in 0..n {
        let l = t[(kk, kk)];
        let mut x = DVector::<C64>::zeros(n);
        x[kk] = C64::new(1.0, 0.0);
        for j in (0..kk).rev() {
            let s: C64 = (j + 1..=kk).map(|m| t[(j, m)] * x[m]).sum();
            let mut den = t[(j, j)] - l;
            if den.norm() < 1e-14 * scale {
                den = C64::new(1e-14 * scale, 0.0);
            }
            x[j] = -s / den;
        }
        let v = &q * x;
        let v = &v / C64::new(v.norm(), 0.0);
        vecs.set_column(kk, &v);
        lam.push(l);
    }
    Ok((lam, vecs))
}

/// Damped Newton iteration with a forward-difference Jacobian. A Jacobian
/// left in `cache` is reused while it keeps reducing the residual.
fn newton<F>(residual: &F, x: &mut [f64], tol: f64, cache: &mut Option<DMatrix<f64>>) -> Result<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x.len();
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = residual(x)?;
    for _ in 0..60 {
        let rn = norm(&r);
        if rn < tol {
            return Ok(());
        }
        let fresh = cache.is_none();
        let jac = match cache {
            Some(j) => j.clone(),
            None => {
                let de = 1e-7;
                let cols: Vec<Vec<f64>> = (0..n)
                    .into_par_iter()
                    .map(|c| {
                        let mut xc = x.to_vec();
                        xc[c] += de;
                        residual(&xc).map(|rc| rc.iter().zip(&r).map(|(a, b)| (a - b) / de).collect())
                    })
                    .collect::<Result<_>>()?;
                let j = DMatrix::from_fn(r.len(), n, |i, j| cols[j][i]);
                *cache = Some(j.clone());
                j
            }
        };
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&r))
            .ok_or_else(|| Error::numerical("singular shooting Jacobian"))?;
        let mut t = 1.0;
        loop {
            let xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - t * b).collect();
            let rt = residual(&xt).ok().map(|rt| (norm(&rt), rt));
            match rt {
                Some((nt, rt)) if nt < rn * if fresh { 1.0 } else { 0.5 } => {
                    x.copy_from_slice(&xt);
                    r = rt;
                    break;
                }
                _ if !fresh => {
                    *cache = None;
                    break;
                }
                _ => {}
            }
            t *= 0.5;
            if t < 1e-3 {
                if rn < 1e2 * tol {
                    return Ok(());
                }
                return Err(Error::numerical(format!("shooting Newton iteration stalled at residual {rn:e}")));
            }
        }
    }
    Err(Error::numerical("shooting Newton iteration did not converge"))
}

/// Reversible solution on `[0, y_max]` launched from `init` on the
/// reversibility section.
///
/// The state is expanded in eigenvectors of the linear flow at the origin so
/// that only nonlinear terms couple the coordinates. Hyperbolic coordinates
/// are bounded solutions: unstable ones vanish at `y_max`, stable ones start
/// from the section at `y = 0`. Center coordinates are shot backward from
/// `y_a` through the nonlinear flow so that they meet the section at `y = 0`
/// with the non-resonant data of `init`; past `y_a` they run forward except
/// for the unstable direction of the resonant pair. Sweeps repeat until they agree.
pub fn reversible_shoot(
    sys: &SpatialSystem,
    init: &NormalState,
    y_max: f64,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let model = &sys.model;
    let k = model.len();
    if init.cp.len() != k || init.cm.len() != k {
        return Err(Error::invalid(format!("initial state must have {k} modes")));
    }
    let scale = init.cp.iter().chain(&init.cm).map(|z| z.norm()).fold(1.0, f64::max);
    let defect = section_defect(model, init);
    if defect > 1e-10 * scale {
        return Err(Error::invalid(format!("initial state is off the reversibility section (defect {defect:e})")));
    }
    if !(y_max > 0.0) || !y_max.is_finite() {
        return Err(Error::invalid(format!("y_max must be positive, got {y_max}")));
    }
    if !(model.eps > 0.0) {
        return Err(Error::invalid("shooting needs eps > 0"));
    }
    let sol = Soliton::new(&model.params)?;
    let grid = UniformGrid::span(0.0, y_max, opts.h)?;
    let ys = grid.points();
    let n = grid.n;
    let (ip, im) = model.resonant();
    let all: Vec<Comp> = (0..k).flat_map(|i| [Comp { i, plus: true }, Comp { i, plus: false }]).collect();
    let pos = |c: Comp| 2 * c.i + usize::from(!c.plus);
    let s_pos = [pos(Comp { i: ip, plus: true }), pos(Comp { i: im, plus: false })];
    let q_pos: Vec<usize> = (0..2 * k).filter(|&p| model.is_center(all[p].i) && !s_pos.contains(&p)).collect();
    let q_init: Vec<C64> = q_pos.iter().map(|&p| get(init, all[p])).collect();
    let flat = |ns: &NormalState| DVector::from_iterator(2 * k, all.iter().map(|&c| get(ns, c)));
    let unflat = |v: &DVector<C64>| {
        let mut ns = NormalState::zeros(k);
        for (c, z) in all.iter().zip(v.iter()) {
            put(&mut ns, *c, *z);
        }
        ns
    };

    let lmat = block_linearisation(model, &all);
    let (lam, vmat) = eigen_decompose(&lmat)?;
    let winv = vmat.clone().try_inverse().ok_or_else(|| Error::numerical("singular eigenvector matrix"))?;
    let center_weight = |q: usize| {
        let col = vmat.column(q);
        (0..2 * k).filter(|&p| model.is_center(all[p].i)).map(|p| col[p].norm_sqr()).sum::<f64>() / col.norm_squared()
    };
    let cen: Vec<usize> = (0..2 * k).filter(|&q| center_weight(q) > 0.5).collect();
    let hyp_s: Vec<usize> = (0..2 * k).filter(|&q| center_weight(q) <= 0.5 && lam[q].re < 0.0).collect();
    let hyp_u: Vec<usize> = (0..2 * k).filter(|&q| center_weight(q) <= 0.5 && lam[q].re >= 0.0).collect();
    let n_center = (0..k).filter(|&i| model.is_center(i)).count();
    if cen.len() != 2 * n_center || hyp_s.len() != hyp_u.len() {
        return Err(Error::Degenerate("linear flow does not split into center and hyperbolic parts".into()));
    }
    let iu = cen.iter().copied().max_by(|&a, &b| lam[a].re.total_cmp(&lam[b].re)).unwrap_or(0);
    if !(lam[iu].re > 0.0) {
        return Err(Error::Degenerate("resonant pair has no unstable direction".into()));
    }
    let free: Vec<usize> = cen.iter().copied().filter(|&q| q != iu).collect();
    let j_a = ((4.0 / lam[iu].re / grid.h).round() as usize).clamp(1, n - 1);
    let y_a = grid.y(j_a);
    let nc = cen.len();
    let wc = DMatrix::from_fn(nc, 2 * k, |r, c| winv[(cen[r], c)]);
    let vc = DMatrix::from_fn(2 * k, nc, |r, c| vmat[(r, cen[c])]);
    let mut jac_cache = None;
    let fwd: Vec<(C64, C64, C64)> = lam.iter().map(|&l| exp_weights(-l, grid.h)).collect();
    let bwd: Vec<(C64, C64, C64)> = lam.iter().map(|&l| exp_weights(l, grid.h)).collect();

    let ansatz = leading_order_ansatz(sys, &sol, &grid)?;
    let mut path = GridPath::new(model, grid, &ansatz);
    let ode_opts = OdeOptions { atol: opts.ode_tol * 1e-4, ..OdeOptions::with_tol(opts.ode_tol) };
    let coords = |path: &GridPath, j: usize| &winv * flat(&to_normal(model, &path.state(j)));
    let physical = |z: &DVector<C64>| from_normal(model, &unflat(&(&vmat * z)));

    let pk = sol.profile(0.0)?;
    let soliton_sup = (pk.a.norm_sqr() + pk.b.norm_sqr()).sqrt();
    let diverged = DIVERGED * soliton_sup.max(1.0);
    let mut change = f64::INFINITY;
    let mut growing = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let old = path.x.clone();
        let mut z: Vec<DVector<C64>> = (0..n).map(|j| coords(&path, j)).collect();
        let g: Vec<DVector<C64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let x = flat(&to_normal(model, &path.state(j)));
                let f = flat(&normal_rhs(model, &unflat(&x)));
                &winv * (f - &lmat * &x)
            })
            .collect();

        // Hyperbolic coordinates: unstable backward from y_max, stable forward
        // from the section at y = 0.
        for &q in &hyp_u {
            let (d, wp, wc) = bwd[q];
            z[n - 1][q] = ZERO;
            for j in (0..n - 1).rev() {
                z[j][q] = d * z[j + 1][q] - wp * g[j + 1][q] - wc * g[j][q];
            }
        }
        if !hyp_s.is_empty() {
            let hyp_modes: Vec<usize> = (0..k).filter(|&i| !model.is_center(i)).collect();
            let section = |x: &[f64]| -> Vec<f64> {
                let mut z0 = z[0].clone();
                for (r, &q) in hyp_s.iter().enumerate() {
                    z0[q] = C64::new(x[2 * r], x[2 * r + 1]);
                }
                let ns = unflat(&(&vmat * z0));
                hyp_modes
                    .iter()
                    .flat_map(|&i| {
                        let e = ns.cp[i] - ns.cm[i].conj();
                        [e.re, e.im]
                    })
                    .collect()
            };
            let m = 2 * hyp_s.len();
            let r0 = section(&vec![0.0; m]);
            let mut jac = DMatrix::zeros(m, m);
            for c in 0..m {
                let mut e = vec![0.0; m];
                e[c] = 1.0;
                let rc = section(&e);
                for r in 0..m {
                    jac[(r, c)] = rc[r] - r0[r];
                }
            }
            let x = jac
                .lu()
                .solve(&-DVector::from_column_slice(&r0))
                .ok_or_else(|| Error::numerical("singular section system"))?;
            for (r, &q) in hyp_s.iter().enumerate() {
                z[0][q] = C64::new(x[2 * r], x[2 * r + 1]);
                let (d, wp, wc) = fwd[q];
                for j in 1..n {
                    z[j][q] = d * z[j - 1][q] + wp * g[j - 1][q] + wc * g[j][q];
                }
            }
        }
        // Unstable direction of the resonant pair past y_a.
        {
            let (d, wp, wc) = bwd[iu];
            z[n - 1][iu] = ZERO;
            for j in (j_a..n - 1).rev() {
                z[j][iu] = d * z[j + 1][iu] - wp * g[j + 1][iu] - wc * g[j][iu];
            }
        }
        for (j, zj) in z.iter().enumerate() {
            path.set(j, &physical(zj));
        }
        path.refresh(model);
        if let Some((j, v)) = path.x.iter().enumerate().find(|(_, v)| !v.re.is_finite() || v.norm() > diverged) {
            return Err(Error::Integration {
                at: grid.y(j / (2 * k)),
                reason: format!("sweep {iterations} diverged to |c| = {:e}", v.norm()),
            });
        }

        // Near field: center coordinates shot backward from y_a, with the
        // linear phases factored out.
        {
            let lam_c: Vec<C64> = cen.iter().map(|&q| lam[q]).collect();
            let lift = |y: f64, zc: &DVector<C64>| {
                let xp = flat(&to_normal(model, &path.eval(y)));
                let dz = zc - &wc * &xp;
                xp + &vc * dz
            };
            let center_rhs = |y: f64, w: &[C64], d: &mut [C64]| {
                let ph: Vec<C64> = lam_c.iter().map(|l| (l * (y - y_a)).exp()).collect();
                let zc = DVector::from_iterator(nc, ph.iter().zip(w).map(|(e, v)| e * v));
                let f = &wc * flat(&normal_rhs(model, &unflat(&lift(y, &zc))));
                for q in 0..nc {
                    d[q] = (f[q] - lam_c[q] * zc[q]) / ph[q];
                }
            };
            let unphase = |y: f64, w: &[C64]| {
                DVector::from_iterator(nc, lam_c.iter().zip(w).map(|(l, v)| (l * (y - y_a)).exp() * v))
            };
            let z_a = &z[j_a];
            let start = |x: &[f64]| -> Vec<C64> {
                cen.iter()
                    .map(|&q| match free.iter().position(|&f| f == q) {
                        Some(r) => z_a[q] + C64::new(x[2 * r], x[2 * r + 1]),
                        None => z_a[q],
                    })
                    .collect()
            };
            let residual = |x: &[f64]| -> Result<Vec<f64>> {
                let out = integrate_at(center_rhs, y_a, &start(x), &[0.0], ode_opts.clone())?;
                let x0 = lift(0.0, &unphase(0.0, &out[0]));
                let mut r = vec![x0[s_pos[0]].im, x0[s_pos[1]].im];
                for (&p, q) in q_pos.iter().zip(&q_init) {
                    let e = x0[p] - q;
                    r.push(e.re);
                    r.push(e.im);
                }
                Ok(r)
            };
            let mut x = vec![0.0; 2 * free.len()];
            newton(&residual, &mut x, 1e-2 * opts.tol * scale, &mut jac_cache)?;
            let s_a = start(&x);
            let back: Vec<f64> = (0..=j_a).rev().map(|j| grid.y(j)).collect();
            let out = integrate_at(center_rhs, y_a, &s_a, &back, ode_opts.clone())?;
            for (jj, w) in out.iter().enumerate() {
                let j = j_a - jj;
                let zc = unphase(grid.y(j), w);
                for (r, &q) in cen.iter().enumerate() {
                    z[j][q] = zc[r];
                }
            }
        }

        // Far field: remaining center coordinates forward from y_a.
        for &q in &free {
            let (d, wp, wc) = fwd[q];
            for j in j_a + 1..n {
                z[j][q] = d * z[j - 1][q] + wp * g[j - 1][q] + wc * g[j][q];
            }
        }
        for (j, zj) in z.iter().enumerate() {
            path.set(j, &physical(zj));
        }
        path.refresh(model);

        if let Some((j, v)) = path.x.iter().enumerate().find(|(_, v)| !v.re.is_finite() || v.norm() > BLOW_UP) {
            return Err(Error::Integration {
                at: grid.y(j / (2 * k)),
                reason: format!("sweep produced |c| = {:e}", v.norm()),
            });
        }
        let prev = change;
        change = path.x.iter().zip(&old).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if change < opts.tol {
            break;
        }
        growing = if change > prev { growing + 1 } else { 0 };
        if growing >= 3 {
            return Err(Error::numerical(format!(
                "sweeps diverge: change grew for three iterations to {change:e} at iteration {iterations}"
            )));
        }
    }
    if change >= opts.tol {
        return Err(Error::numerical(format!(
            "sweeps did not converge in {} iterations (last change {change:e})",
            opts.max_iter
        )));
    }
    let states: Vec<CanonicalState> = (0..n).map(|j| path.state(j)).collect();
    let symmetry_defect = section_defect(model, &to_normal(model, &states[0]));
    let sup_norm = states.iter().map(|s| s.psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
    Ok(ShootResult {
        trajectory: SpatialTrajectory::from_states(model.clone(), ys, states),
        summary: ShootSummary { y_max, iterations, change, symmetry_defect, sup_norm, soliton_sup },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeSup {
    pub m: i32,
    pub sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub eps: f64,
    pub order: u32,
    pub window: [f64; 2],
    /// Sup over the window of `|psi_m - prediction_m|` per mode.
    pub modes: Vec<ModeSup>,
    /// Largest deviation of `psi_{+n}` and `psi_{-n}`.
    pub resonant_deviation: f64,
    /// Sup over the window and over `x` of the physical field deviation
    /// `sqrt(eps) |sum_m (psi_m - prediction_m) e^{i m x/2}|`.
    pub field_deviation: f64,
    /// Field deviation sup over the second half of the window over that of the first half.
    pub growth_factor: Option<f64>,
}

impl TailReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Deviation of a trajectory from the coupled-mode prediction
/// (`psi_n = a(eps y)`, `psi_{-n} = b(eps y)`, all other modes zero) over the
/// window `[0, l_window / eps^{order+1}]`.
pub fn tail_measure(traj: &SpatialTrajectory, eps: f64, order: u32, l_window: f64) -> Result<TailReport> {
    let model = &traj.model;
    if order != 1 {
        return Err(Error::invalid(format!("only order 1 is implemented, got {order}")));
    }
    if (eps - model.eps).abs() > 1e-15 * eps.max(1.0) {
        return Err(Error::invalid(format!("eps = {eps} differs from the trajectory's {}", model.eps)));
    }
    if !(l_window > 0.0) {
        return Err(Error::invalid("window constant must be positive"));
    }
    let last = traj.ys.last().copied().ok_or_else(|| Error::invalid("empty trajectory"))?;
    let y_end = if eps == 0.0 { last } else { l_window / eps.powi(order as i32 + 1) };
    if last < y_end * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("trajectory ends at y = {last}, window needs {y_end}")));
    }
    let sol = Soliton::new(&model.params)?;
    let k = model.len();
    let (ip, im) = model.resonant();
    let nx = (4 * k).next_power_of_two();
    let phases: Vec<Vec<C64>> = (0..nx)
        .map(|ix| {
            let x = 4.0 * std::f64::consts::PI * ix as f64 / nx as f64;
            model.modes.iter().map(|m| C64::from_polar(1.0, m as f64 * x / 2.0)).collect()
        })
        .collect();
    let mut sups = vec![0.0f64; k];
    let (mut first, mut second, mut field): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (y, st) in traj.ys.iter().zip(&traj.states) {
        if *y < 0.0 || *y > y_end * (1.0 + 1e-12) {
            continue;
        }
        let pt = sol.profile(eps * y)?;
        let mut d = st.psi.clone();
        d[ip] -= pt.a;
        d[im] -= pt.b;
        for (s, z) in sups.iter_mut().zip(&d) {
            *s = s.max(z.norm());
        }
        let fd = phases.iter().map(|ph| d.iter().zip(ph).map(|(a, b)| a * b).sum::<C64>().norm()).fold(0.0, f64::max)
            * eps.sqrt();
        field = field.max(fd);
        if *y <= y_end / 2.0 {
            first = first.max(fd);
        } else {
            second = second.max(fd);
        }
    }
    let growth_factor = if first > 0.0 {
        Some(second / first)
    } else if second == 0.0 {
        Some(1.0)
    } else {
        None
    };
    Ok(TailReport {
        eps,
        order,
        window: [0.0, y_end],
        modes: model.modes.iter().zip(&sups).map(|(m, s)| ModeSup { m, sup: *s }).collect(),
        resonant_deviation: sups[ip].max(sups[im]),
        field_deviation: field,
        growth_factor,
    })
}

/// Tail experiment: shoot from the leading-order ansatz at `y = 0` (projected
/// onto the reversibility section) and measure the deviation over
/// `[0, l_window / eps^2]`.
pub fn tail_experiment(sys: &SpatialSystem, l_window: f64, opts: &ShootOptions) -> Result<(TailReport, ShootSummary)> {
    let model = &sys.model;
    let sol = Soliton::new(&model.params)?;
    let g0 = UniformGrid::new(0.0, opts.h, 2)?;
    let init = to_normal(model, &leading_order_ansatz(sys, &sol, &g0)?[0]);
    let init = project_to_section(model, &init);
    let y_end = l_window / model.eps.powi(2);
    let margin = min_beta(model).map_or(10.0, |b| 30.0 / b);
    let shot = reversible_shoot(sys, &init, y_end + margin, opts)?;
    let report = tail_measure(&shot.trajectory, model.eps, 1, l_window)?;
    Ok((report, shot.summary))
}

pub fn summary_json(report: &TailReport, shot: &ShootSummary) -> serde_json::Value {
    serde_json::json!({ "tail": report, "shoot": shot })
}
