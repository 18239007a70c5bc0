//! Embedded Dormand-Prince 5(4) integrator over complex state vectors, with
//! the classical fourth-order continuous extension for dense output.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, ..Default::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-10, h0: None, h_max: f64::INFINITY, h_min: 1e-14, max_steps: 50_000_000 }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<C64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> &[C64] {
        &self.rcont[0]
    }

    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.rcont[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

pub struct Dopri5<F> {
    f: F,
    t: f64,
    t_end: f64,
    dir: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    h: f64,
    facold: f64,
    opts: OdeOptions,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    pub fn new(f: F, t0: f64, y0: &[C64], t_end: f64, opts: OdeOptions) -> Result<Self> {
        if !(opts.rtol > 0.0 && opts.atol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::invalid("integration bounds must be finite"));
        }
        if y0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("initial state is not finite"));
        }
        let n = y0.len();
        let zero = vec![C64::new(0.0, 0.0); n];
        let mut s = Dopri5 {
            f,
            t: t0,
            t_end,
            dir: if t_end >= t0 { 1.0 } else { -1.0 },
            y: y0.to_vec(),
            k: std::array::from_fn(|_| zero.clone()),
            ytmp: zero.clone(),
            ynew: zero,
            h: 0.0,
            facold: 1e-4,
            opts,
            accepted: 0,
            rejected: 0,
            evals: 1,
        };
        (s.f)(t0, y0, &mut s.k[0]);
        let h = match s.opts.h0 {
            Some(h) => h.abs(),
            None => s.initial_step(),
        };
        s.h = h.min(s.opts.h_max).min((t_end - t0).abs().max(f64::MIN_POSITIVE));
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    pub fn done(&self) -> bool {
        (self.t_end - self.t) * self.dir <= 0.0
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len().max(1) as f64;
        let (atol, rtol) = (self.opts.atol, self.opts.rtol);
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..self.y.len() {
            let sk = atol + rtol * self.y[i].norm();
            dnf += (self.k[0][i].norm() / sk).powi(2);
            dny += (self.y[i].norm() / sk).powi(2);
        }
        dnf /= n;
        dny /= n;
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(self.opts.h_max);
        for i in 0..self.y.len() {
            self.ytmp[i] = self.y[i] + self.dir * h * self.k[0][i];
        }
        (self.f)(self.t + self.dir * h, &self.ytmp, &mut self.k[1]);
        self.evals += 1;
        let mut der2 = 0.0;
        for i in 0..self.y.len() {
            let sk = atol + rtol * self.y[i].norm();
            der2 += ((self.k[1][i] - self.k[0][i]).norm() / sk).powi(2);
        }
        der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
        (100.0 * h).min(h1).min(self.opts.h_max)
    }

    /// Advances by one accepted step. Returns `None` once `t_end` is reached.
    pub fn step(&mut self) -> Result<Option<DenseStep>> {
        if self.done() {
            return Ok(None);
        }
        let n = self.y.len();
        let mut nstep = 0usize;
        loop {
            nstep += 1;
            if self.accepted + self.rejected > self.opts.max_steps || nstep > 1000 {
                return Err(Error::Integration { at: self.t, reason: "too many steps".into() });
            }
            if self.h < self.opts.h_min * self.t.abs().max(1.0) {
                return Err(Error::Integration {
                    at: self.t,
                    reason: format!("step size underflow (h = {:e})", self.h),
                });
            }
            let mut last = false;
            if (self.t + self.dir * self.h - self.t_end) * self.dir >= 0.0 {
                self.h = (self.t_end - self.t).abs();
                last = true;
            }
            let h = self.dir * self.h;
            let t = self.t;
            let y = &self.y;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let ytmp = &mut self.ytmp;
            let f = &mut self.f;

            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, ytmp, k6);
            let ynew = &mut self.ynew;
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t + h, ynew, k7);
            self.evals += 6;

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.opts.atol + self.opts.rtol * y[i].norm().max(ynew[i].norm());
                let r = e.norm() / sk;
                err += r * r;
                finite &= ynew[i].re.is_finite() && ynew[i].im.is_finite();
            }
            err = (err / n.max(1) as f64).sqrt();
            if !finite || !err.is_finite() {
                self.rejected += 1;
                self.h *= 0.1;
                continue;
            }

            const BETA: f64 = 0.04;
            let expo1 = 0.2 - BETA * 0.75;
            let fac11 = err.powf(expo1);
            let fac = (fac11 / self.facold.powf(BETA) / 0.9).clamp(0.1, 5.0);
            let hnew = self.h / fac;

            if err <= 1.0 {
                self.facold = err.max(1e-4);
                let mut rc: [Vec<C64>; 5] = std::array::from_fn(|_| Vec::with_capacity(n));
                for i in 0..n {
                    let dy = ynew[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rc[0].push(y[i]);
                    rc[1].push(dy);
                    rc[2].push(bspl);
                    rc[3].push(dy - h * k7[i] - bspl);
                    rc[4].push(h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]));
                }
                let step = DenseStep { t0: t, h, rcont: rc };
                std::mem::swap(k1, k7);
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.t = if last { self.t_end } else { t + h };
                self.accepted += 1;
                self.h = hnew.min(self.opts.h_max);
                return Ok(Some(step));
            } else {
                self.rejected += 1;
                self.h /= (fac11 / 0.9).min(5.0);
            }
        }
    }
}

/// Integrates and keeps every step for later interpolation.
pub struct DenseSolution {
    pub steps: Vec<DenseStep>,
    pub t0: f64,
    pub t_end: f64,
    pub y_end: Vec<C64>,
}

impl DenseSolution {
    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.y_end.len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        if self.steps.is_empty() {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let fwd = self.t_end >= self.t0;
        let idx = self.steps.partition_point(|s| if fwd { s.t1() < t } else { s.t1() > t });
        let idx = idx.min(self.steps.len() - 1);
        self.steps[idx].eval_into(t, out);
    }

    /// Node times and states, including the endpoint.
    pub fn nodes(&self) -> (Vec<f64>, Vec<Vec<C64>>) {
        let mut ts: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        let mut ys: Vec<Vec<C64>> = self.steps.iter().map(|s| s.y0().to_vec()).collect();
        ts.push(self.t_end);
        ys.push(self.y_end.clone());
        (ts, ys)
    }
}

pub fn integrate_dense<F>(f: F, t0: f64, y0: &[C64], t_end: f64, opts: OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let mut solver = Dopri5::new(f, t0, y0, t_end, opts)?;
    let mut steps = Vec::new();
    while let Some(s) = solver.step()? {
        steps.push(s);
    }
    Ok(DenseSolution { steps, t0, t_end, y_end: solver.y().to_vec() })
}

/// Integrates from `t0` and returns the state at each of `times`, which must be
/// monotone in the direction of integration.
pub fn integrate_at<F>(f: F, t0: f64, y0: &[C64], times: &[f64], opts: OdeOptions) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let Some(&t_end) = times.last() else {
        return Ok(Vec::new());
    };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    if times.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) || (times[0] - t0) * dir < 0.0 {
        return Err(Error::invalid("output times must be monotone from t0"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut i = 0;
    while i < times.len() && times[i] == t0 {
        out.push(y0.to_vec());
        i += 1;
    }
    if i == times.len() {
        return Ok(out);
    }
    let mut solver = Dopri5::new(f, t0, y0, t_end, opts)?;
    let mut buf = vec![C64::new(0.0, 0.0); y0.len()];
    while let Some(s) = solver.step()? {
        while i < times.len() && (times[i] - s.t1()) * dir <= 0.0 {
            s.eval_into(times[i], &mut buf);
            out.push(buf.clone());
            i += 1;
        }
    }
    while i < times.len() {
        out.push(solver.y().to_vec());
        i += 1;
    }
    Ok(out)
}
