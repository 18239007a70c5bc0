//! Split-step spectral solver for `i E_t = -E_xx + eps W(x) E + sigma |E|^2 E`
//! on a periodic box, and comparison against the coupled-mode ansatz.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::cme::{CmeParams, Soliton};
use crate::error::{Error, Result};
use crate::io::Csv;
use crate::potential::PotentialSpec;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Periodic grid `x_j = -L/2 + j L/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GpGrid {
    pub lx: f64,
    pub nx: usize,
}

impl GpGrid {
    pub fn new(lx: f64, nx: usize) -> Result<Self> {
        if !nx.is_power_of_two() || nx < 4 {
            return Err(Error::invalid(format!("point count must be a power of two >= 4, got {nx}")));
        }
        if !(lx > 0.0) || !lx.is_finite() {
            return Err(Error::invalid(format!("box length must be positive, got {lx}")));
        }
        let periods = lx / (2.0 * PI);
        if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) {
            return Err(Error::invalid(format!("box length {lx} is not a multiple of 2 pi")));
        }
        Ok(GpGrid { lx, nx })
    }

    /// Box holding `40/eps` slow units of envelope on which the carrier
    /// `e^{i n x/2}` is periodic, with spacing at most `0.1`.
    pub fn for_soliton(params: &CmeParams, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        let period = if params.n % 2 == 1 { 4.0 * PI } else { 2.0 * PI };
        let lx = period * (40.0 / (period * eps)).ceil();
        let nx = ((lx / 0.1).ceil() as usize).next_power_of_two();
        GpGrid::new(lx, nx)
    }

    /// Same box with twice the points.
    pub fn refined(&self) -> Self {
        GpGrid { lx: self.lx, nx: 2 * self.nx }
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.lx + j as f64 * self.dx()
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        let j = if j <= self.nx / 2 { j as f64 } else { j as f64 - self.nx as f64 };
        2.0 * PI * j / self.lx
    }
}

#[derive(Clone, Debug)]
pub struct GpField {
    pub grid: GpGrid,
    pub values: Vec<C64>,
    pub t: f64,
}

impl GpField {
    pub fn new(grid: GpGrid, values: Vec<C64>, t: f64) -> Result<Self> {
        if values.len() != grid.nx {
            return Err(Error::invalid(format!("{} values for {} grid points", values.len(), grid.nx)));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("field contains non-finite values"));
        }
        Ok(GpField { grid, values, t })
    }

    /// Discrete `L^2` norm `(dx sum |E|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `int |E_x|^2 + eps W |E|^2 + (sigma/2) |E|^4 dx` with spectral `E_x`.
    pub fn energy(&self, potential: &PotentialSpec, eps: f64, sigma: i32) -> f64 {
        let g = &self.grid;
        let mut spec = self.values.clone();
        FftPlanner::new().plan_fft_forward(g.nx).process(&mut spec);
        let kin: f64 =
            spec.iter().enumerate().map(|(j, z)| g.wavenumber(j).powi(2) * z.norm_sqr()).sum::<f64>() / g.nx as f64;
        let pot: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, z)| {
                let a = z.norm_sqr();
                eps * potential.evaluate(g.x(j)) * a + 0.5 * sigma as f64 * a * a
            })
            .sum();
        g.dx() * (kin + pot)
    }

    /// Envelope centre by the circular mean of `|E|^2` and the peak of `|E|`
    /// by quadratic interpolation of `|E|^2` around the largest sample.
    pub fn peak(&self) -> (f64, f64) {
        let g = &self.grid;
        let n = g.nx;
        let dens: Vec<f64> = self.values.iter().map(|z| z.norm_sqr()).collect();
        let mean: C64 =
            dens.iter().enumerate().map(|(j, d)| d * C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)).sum();
        let centre = -0.5 * g.lx + mean.arg().rem_euclid(2.0 * PI) / (2.0 * PI) * g.lx;
        let (jm, _) = dens.iter().enumerate().fold((0, f64::MIN), |acc, (j, d)| if *d > acc.1 { (j, *d) } else { acc });
        let (l, c, r) = (dens[(jm + n - 1) % n], dens[jm], dens[(jm + 1) % n]);
        let curv = l - 2.0 * c + r;
        let top = if curv < 0.0 { c - 0.125 * (r - l).powi(2) / curv } else { c };
        (centre, top.max(0.0).sqrt())
    }
}

/// Strang splitting: half step of `i E_t = (eps W + sigma |E|^2) E`, exact
/// linear step of `i E_t = -E_xx` in Fourier space, half nonlinear step.
/// Both substeps are unitary; the norm drift caused by rounding in the
/// transforms and phase factors is accumulated and removed once it exceeds `1e-13`.
pub struct SplitStep {
    grid: GpGrid,
    dt: f64,
    sigma: f64,
    eps_w: Vec<f64>,
    linear: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    steps: u64,
    drift: f64,
    correct_norm: bool,
}

impl SplitStep {
    pub fn new(grid: GpGrid, dt: f64, potential: &PotentialSpec, eps: f64, sigma: i32) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
        }
        if !(-1..=1).contains(&sigma) {
            return Err(Error::invalid(format!("sigma must be -1, 0 or 1, got {sigma}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.nx);
        let inv = planner.plan_fft_inverse(grid.nx);
        let scratch = vec![C64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
        let norm = 1.0 / grid.nx as f64;
        Ok(SplitStep {
            grid,
            dt,
            sigma: sigma as f64,
            eps_w: (0..grid.nx).map(|j| eps * potential.evaluate(grid.x(j))).collect(),
            linear: (0..grid.nx).map(|j| norm * C64::from_polar(1.0, -grid.wavenumber(j).powi(2) * dt)).collect(),
            fwd,
            inv,
            scratch,
            steps: 0,
            drift: 0.0,
            correct_norm: true,
        })
    }

    /// Enables or disables removal of the accumulated rounding drift of the norm (on by default).
    pub fn set_norm_correction(&mut self, on: bool) {
        self.correct_norm = on;
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn nonlinear(&self, v: &mut [C64], tau: f64) {
        for (z, w) in v.iter_mut().zip(&self.eps_w) {
            *z *= C64::from_polar(1.0, -(w + self.sigma * z.norm_sqr()) * tau);
        }
    }

    /// Advances `field` by one step.
    pub fn step(&mut self, field: &mut GpField) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::invalid("field and propagator grids differ"));
        }
        let half = 0.5 * self.dt;
        let before: f64 = field.values.iter().map(|z| z.norm_sqr()).sum();
        self.nonlinear(&mut field.values, half);
        self.fwd.process_with_scratch(&mut field.values, &mut self.scratch);
        for (z, e) in field.values.iter_mut().zip(&self.linear) {
            *z *= e;
        }
        self.inv.process_with_scratch(&mut field.values, &mut self.scratch);
        self.nonlinear(&mut field.values, half);
        let after: f64 = field.values.iter().map(|z| z.norm_sqr()).sum();
        if before > 0.0 {
            self.drift += (after - before) / before;
        }
        if self.correct_norm && self.drift.abs() > 1e-13 {
            let fix = 1.0 / (1.0 + self.drift).sqrt();
            field.values.iter_mut().for_each(|z| *z *= fix);
            self.drift = 0.0;
        }
        self.steps += 1;
        field.t += self.dt;
        if field.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::numerical(format!("field became non-finite at step {}", self.steps)));
        }
        Ok(())
    }

    pub fn advance(&mut self, field: &mut GpField, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(field)?;
        }
        Ok(())
    }
}

/// Coupled-mode ansatz `sqrt(eps) [a e^{i n x/2} + b e^{-i n x/2}] e^{-i n^2 t/4}`
/// with the lab-frame soliton centred at `x = 0` at `t = 0`.
pub fn ansatz_field(sol: &Soliton, eps: f64, grid: &GpGrid, t: f64) -> Result<Vec<C64>> {
    let n = sol.params.nf();
    let carrier = C64::from_polar(eps.sqrt(), -n * n * t / 4.0);
    (0..grid.nx)
        .into_par_iter()
        .map(|j| {
            let x = grid.x(j);
            let (a, b) = sol.lab(eps * x, eps * t)?;
            Ok(carrier * (a * C64::from_polar(1.0, 0.5 * n * x) + b * C64::from_polar(1.0, -0.5 * n * x)))
        })
        .collect()
}

/// Field at `t = 0` from the coupled-mode ansatz.
pub fn init_field(params: &CmeParams, eps: f64, grid: &GpGrid) -> Result<GpField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let sol = Soliton::new(params)?;
    let values = ansatz_field(&sol, eps, grid, 0.0)?;
    let peak = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = values[0].norm().max(values[grid.nx - 1].norm());
    if edge > 1e-8 * peak {
        return Err(Error::invalid(format!(
            "soliton too wide for box: edge amplitude {edge:e} vs peak {peak:e} (box length {})",
            grid.lx
        )));
    }
    GpField::new(*grid, values, 0.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ErrorSample {
    pub t: f64,
    pub t_slow: f64,
    pub sup_error: f64,
    pub l2_error: f64,
    pub peak_x: f64,
    pub peak_amp: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorCurve {
    pub eps: f64,
    pub dt: f64,
    pub grid: GpGrid,
    pub samples: Vec<ErrorSample>,
}

impl ErrorCurve {
    pub fn max_error(&self) -> f64 {
        self.samples.iter().map(|s| s.sup_error).fold(0.0, f64::max)
    }

    /// Least-squares speed of the envelope centre.
    pub fn peak_speed(&self) -> f64 {
        let n = self.samples.len() as f64;
        let (st, sx) = self.samples.iter().fold((0.0, 0.0), |(a, b), s| (a + s.t, b + s.peak_x));
        let (mt, mx) = (st / n, sx / n);
        let (num, den) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a + (s.t - mt) * (s.peak_x - mx), b + (s.t - mt).powi(2)));
        num / den
    }

    /// Columns `t, T, sup_error, l2_error, peak_x, peak_amp`.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["t", "T", "sup_error", "l2_error", "peak_x", "peak_amp"]);
        for s in &self.samples {
            csv.row_f64(&[s.t, s.t_slow, s.sup_error, s.l2_error, s.peak_x, s.peak_amp]);
        }
        csv.into_string()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorConfig {
    /// Final slow time `T = eps t`.
    pub t_end_slow: f64,
    pub dt: f64,
    /// Number of comparison times after `t = 0`.
    pub samples: usize,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig { t_end_slow: 2.0, dt: 0.01, samples: 20 }
    }
}

/// Evolves the ansatz initial data and records its deviation from the ansatz.
pub fn run_error_experiment(
    params: &CmeParams,
    potential: &PotentialSpec,
    eps: f64,
    grid: &GpGrid,
    cfg: &ErrorConfig,
) -> Result<ErrorCurve> {
    if !(cfg.t_end_slow > 0.0) || cfg.samples == 0 {
        return Err(Error::invalid("need a positive final time and at least one sample"));
    }
    if (potential.harmonic(params.n) - params.w2n).abs() > 1e-12 * params.w2n.abs().max(1.0) {
        return Err(Error::invalid("potential harmonic differs from w_2n"));
    }
    let sol = Soliton::new(params)?;
    let mut field = init_field(params, eps, grid)?;
    let t_end = cfg.t_end_slow / eps;
    let total = (t_end / cfg.dt).ceil() as usize;
    let dt = t_end / total as f64;
    let mut prop = SplitStep::new(*grid, dt, potential, eps, params.sigma)?;
    let mut samples = vec![sample(&sol, eps, &field)?];
    let mut done = 0;
    for s in 1..=cfg.samples {
        let target = (total * s) / cfg.samples;
        prop.advance(&mut field, target - done)?;
        done = target;
        field.t = dt * done as f64;
        let smp = sample(&sol, eps, &field)?;
        if smp.peak_x.abs() > 0.4 * grid.lx {
            return Err(Error::numerical(format!("soliton left the box at t = {}", field.t)));
        }
        samples.push(smp);
    }
    Ok(ErrorCurve { eps, dt, grid: *grid, samples })
}

fn sample(sol: &Soliton, eps: f64, field: &GpField) -> Result<ErrorSample> {
    let reference = ansatz_field(sol, eps, &field.grid, field.t)?;
    let (mut sup, mut l2): (f64, f64) = (0.0, 0.0);
    for (a, b) in field.values.iter().zip(&reference) {
        let d = (a - b).norm();
        sup = sup.max(d);
        l2 += d * d;
    }
    let (peak_x, peak_amp) = field.peak();
    Ok(ErrorSample {
        t: field.t,
        t_slow: eps * field.t,
        sup_error: sup,
        l2_error: (l2 * field.grid.dx()).sqrt(),
        peak_x,
        peak_amp,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub eps: Vec<f64>,
    pub max_error: Vec<f64>,
    /// Fitted exponent of `max_error ~ C eps^p`.
    pub exponent: f64,
    /// Half-width of the 95% band of the exponent.
    pub band: f64,
    /// Exponent with twice the points and half the time step, when requested.
    pub refined_exponent: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingConfig {
    pub eps: Vec<f64>,
    pub run: ErrorConfig,
    pub self_convergence: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { eps: vec![0.1, 0.05, 0.025], run: ErrorConfig::default(), self_convergence: true }
    }
}

/// Slope, intercept and slope standard error of a least-squares line.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, icpt, se)
}

/// Fits `log(max error)` against `log eps` over the configured values.
pub fn scaling_study(params: &CmeParams, potential: &PotentialSpec, cfg: &ScalingConfig) -> Result<ScalingReport> {
    if cfg.eps.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 eps values, got {}", cfg.eps.len())));
    }
    if cfg.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("eps values must be positive"));
    }
    let r0 = cfg.eps[1] / cfg.eps[0];
    if cfg.eps.windows(2).any(|w| ((w[1] / w[0]) / r0 - 1.0).abs() > 1e-9) {
        return Err(Error::invalid("eps values must form a geometric progression"));
    }
    let run = |eps: f64, refine: bool| -> Result<f64> {
        let mut grid = GpGrid::for_soliton(params, eps)?;
        let mut rc = cfg.run.clone();
        if refine {
            grid = grid.refined();
            rc.dt *= 0.5;
        }
        Ok(run_error_experiment(params, potential, eps, &grid, &rc)?.max_error())
    };
    let fit = |errs: &[f64]| {
        let lx: Vec<f64> = cfg.eps.iter().map(|e| e.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        fit_line(&lx, &ly)
    };
    let max_error = cfg.eps.par_iter().map(|&e| run(e, false)).collect::<Result<Vec<_>>>()?;
    let (exponent, _, se) = fit(&max_error);
    let refined_exponent = if cfg.self_convergence {
        let errs = cfg.eps.par_iter().map(|&e| run(e, true)).collect::<Result<Vec<_>>>()?;
        Some(fit(&errs).0)
    } else {
        None
    };
    let band = student_t95(cfg.eps.len() - 2) * se;
    Ok(ScalingReport { eps: cfg.eps.clone(), max_error, exponent, band, refined_exponent })
}

/// Two-sided 95% Student-t quantile.
fn student_t95(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= T.len() {
        T[dof - 1]
    } else {
        1.96 + 2.5 / dof as f64
    }
}

/// Plane wave `A e^{i k x}` on `grid`, exact for `eps = 0`.
pub fn plane_wave(grid: &GpGrid, amp: C64, mode: i64) -> (Vec<C64>, f64) {
    let k = 2.0 * PI * mode as f64 / grid.lx;
    ((0..grid.nx).map(|j| amp * C64::from_polar(1.0, k * grid.x(j))).collect(), k)
}

/// Exact `eps = 0` evolution of a plane wave: `A e^{i k x - i (k^2 + sigma |A|^2) t}`.
pub fn plane_wave_exact(grid: &GpGrid, amp: C64, mode: i64, sigma: i32, t: f64) -> Vec<C64> {
    let (v, k) = plane_wave(grid, amp, mode);
    let rot = C64::from_polar(1.0, -(k * k + sigma as f64 * amp.norm_sqr()) * t);
    v.into_iter().map(|z| z * rot).collect()
}

/// Moving bright soliton of `i E_t = -E_xx - |E|^2 E`:
/// `sqrt(2) eta sech(eta (x - 2 k t)) e^{i (k x + (eta^2 - k^2) t)}`.
pub fn bright_soliton(grid: &GpGrid, eta: f64, k: f64, t: f64) -> Vec<C64> {
    (0..grid.nx)
        .map(|j| {
            let x = grid.x(j);
            let env = 2f64.sqrt() * eta / (eta * (x - 2.0 * k * t)).cosh();
            env * (I * (k * x + (eta * eta - k * k) * t)).exp()
        })
        .collect()
}
