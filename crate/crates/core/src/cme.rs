//! Coupled-mode equations for the two counter-propagating envelopes `a, b`
//! in the frame `Y = X - cT` rotating at frequency `Omega`:
//!
//! ```text
//!  i(n-c) a' + Omega a = w b + sigma (|a|^2 + 2|b|^2) a
//! -i(n+c) b' + Omega b = w a + sigma (2|a|^2 + |b|^2) b
//! ```
//!
//! together with the closed-form gap soliton, its conserved quantities and
//! the planar reduction used to study it.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Csv;
use crate::ode::{integrate_dense, DenseSolution, OdeOptions};
use crate::potential::PotentialSpec;
use crate::quad;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmeParams {
    pub n: i32,
    pub c: f64,
    pub omega: f64,
    pub sigma: i32,
    pub w2n: f64,
}

impl CmeParams {
    pub fn new(n: i32, c: f64, omega: f64, sigma: i32, w2n: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid(format!("n must be >= 1, got {n}")));
        }
        if !c.is_finite() || c < 0.0 || c >= n as f64 {
            return Err(Error::invalid(format!("velocity c = {c} outside [0, n) with n = {n}")));
        }
        if sigma != 1 && sigma != -1 {
            return Err(Error::invalid(format!("sigma must be +1 or -1, got {sigma}")));
        }
        if !w2n.is_finite() || w2n == 0.0 {
            return Err(Error::invalid(format!("resonant coefficient w_2n = {w2n} opens no gap")));
        }
        if !omega.is_finite() {
            return Err(Error::invalid("Omega is not finite"));
        }
        check_nondegenerate(n, c)?;
        let p = CmeParams { n, c, omega, sigma, w2n };
        let om0 = p.omega0();
        if omega.abs() >= om0 {
            return Err(Error::invalid(format!("Omega = {omega} lies outside the gap (|Omega| < {om0})")));
        }
        Ok(p)
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `sqrt(n^2 - c^2)`.
    pub fn s(&self) -> f64 {
        (self.nf().powi(2) - self.c * self.c).sqrt()
    }

    /// Gap half-width `|w| sqrt(n^2 - c^2) / n`.
    pub fn omega0(&self) -> f64 {
        self.w2n.abs() * self.s() / self.nf()
    }

    /// Frequency in the co-moving frame, always defined.
    pub fn mu0(&self) -> f64 {
        self.omega * self.nf() / self.s()
    }

    /// Lorentz-frame frequency; undefined when `c = 1`.
    pub fn mu(&self) -> Option<f64> {
        let d = 1.0 - self.c * self.c;
        if d.abs() < 1e-14 {
            None
        } else {
            Some(self.omega * self.s() / (self.nf() * d))
        }
    }

    /// Spatial decay rate of the soliton in the variable `Y`.
    pub fn decay_rate_y(&self) -> f64 {
        (self.w2n * self.w2n - self.mu0().powi(2)).sqrt() / self.s()
    }
}

fn check_nondegenerate(n: i32, c: f64) -> Result<()> {
    if c == 0.0 {
        return Ok(());
    }
    let x = (f64::from(n * n) + c * c) / (2.0 * c);
    let k = x.round();
    if (k as i64 - n as i64).rem_euclid(2) == 0 && (x - k).abs() <= 1e-10 * x.abs().max(1.0) {
        return Err(Error::degenerate(format!(
            "(n^2 + c^2)/(2c) = {x} is an integer of the parity of n; spatial eigenvalues collide"
        )));
    }
    Ok(())
}

/// Reads `w_2n` from the potential and validates the parameter set.
pub fn cme_params(n: i32, c: f64, omega: f64, sigma: i32, potential: &PotentialSpec) -> Result<CmeParams> {
    CmeParams::new(n, c, omega, sigma, potential.harmonic(n))
}

/// Right-hand side `d/dY (a, b)`.
pub fn cme_rhs(p: &CmeParams, state: [C64; 2]) -> [C64; 2] {
    let [a, b] = state;
    let (n, c, om, sg, w) = (p.nf(), p.c, p.omega, p.sigma as f64, p.w2n);
    let a2 = a.norm_sqr();
    let b2 = b.norm_sqr();
    let fa = w * b + sg * (a2 + 2.0 * b2) * a - om * a;
    let fb = w * a + sg * (2.0 * a2 + b2) * b - om * b;
    [fa / (I * (n - c)), fb / (-I * (n + c))]
}

/// Charge `Q` and Hamiltonian `H_S`, both conserved along the flow.
pub fn conserved(p: &CmeParams, state: [C64; 2]) -> (f64, f64) {
    let [a, b] = state;
    let (n, c) = (p.nf(), p.c);
    let a2 = a.norm_sqr();
    let b2 = b.norm_sqr();
    let q = (n - c) * a2 - (n + c) * b2;
    let h = p.omega * (a2 + b2)
        - p.w2n * 2.0 * (a.conj() * b).re
        - 0.5 * p.sigma as f64 * (a2 * a2 + 4.0 * a2 * b2 + b2 * b2);
    (q, h)
}

/// Closed-form gap soliton of the focusing system, parametrised by `mu0`.
#[derive(Clone, Debug)]
pub struct Soliton {
    pub params: CmeParams,
    amp: f64,
    kap: f64,
    sp: f64,
    sm: f64,
    sgn_w: f64,
    alpha: f64,
}

/// Envelope values and their first two `Y` derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ProfilePoint {
    pub a: C64,
    pub b: C64,
    pub da: C64,
    pub db: C64,
    pub d2a: C64,
    pub d2b: C64,
}

impl Soliton {
    pub fn new(p: &CmeParams) -> Result<Self> {
        if p.sigma != -1 {
            return Err(Error::invalid("closed-form soliton exists only for sigma = -1"));
        }
        let (n, c) = (p.nf(), p.c);
        let s2 = n * n - c * c;
        let w = p.w2n.abs();
        let mu0 = p.mu0();
        if mu0.abs() >= w {
            return Err(Error::invalid("Omega outside the gap"));
        }
        Ok(Soliton {
            params: *p,
            amp: (2.0 * s2 / (3.0 * n * n - c * c)).sqrt() * (w * w - mu0 * mu0).sqrt(),
            kap: (w * w - mu0 * mu0).sqrt(),
            sp: (w + mu0).sqrt(),
            sm: (w - mu0).sqrt(),
            sgn_w: p.w2n.signum(),
            alpha: ((n + c) / (n - c)).powf(0.25),
        })
    }

    /// Decay rate of `|phi|` in `xi`.
    pub fn kappa(&self) -> f64 {
        self.kap
    }

    fn denom(&self, xi: f64) -> (C64, C64) {
        let (ch, sh) = ((self.kap * xi).cosh(), (self.kap * xi).sinh());
        let d = C64::new(self.sp * ch, -self.sm * sh);
        let dd = self.kap * C64::new(self.sp * sh, -self.sm * ch);
        (d, dd)
    }

    pub fn phi(&self, xi: f64) -> C64 {
        let (d, _) = self.denom(xi);
        if !d.re.is_finite() {
            return C64::new(0.0, 0.0);
        }
        self.amp / d
    }

    /// `(phi, phi', phi'')` in `xi`.
    pub fn phi_derivs(&self, xi: f64) -> (C64, C64, C64) {
        let (d, dd) = self.denom(xi);
        if !d.re.is_finite() || !dd.re.is_finite() {
            let z = C64::new(0.0, 0.0);
            return (z, z, z);
        }
        let f = self.amp / d;
        let q = dd / d;
        let f1 = -f * q;
        let f2 = f * (2.0 * q * q - self.kap * self.kap);
        (f, f1, f2)
    }

    /// `int_0^xi |phi|^2` by adaptive quadrature.
    pub fn phi_sq_integral(&self, xi: f64) -> Result<f64> {
        let scale = self.amp * self.amp / self.kap;
        quad::integrate(|t| self.phi(t).norm_sqr(), 0.0, xi, 1e-13 * scale.max(1e-300))
    }

    /// Phase `varphi(xi)` of the Lorentz-frame pair `A = phi e^{i varphi}`.
    pub fn phase(&self, xi: f64) -> Result<f64> {
        let p = &self.params;
        let (n, c) = (p.nf(), p.c);
        let lin = if p.n == 1 {
            0.0
        } else {
            let mu = p.mu().ok_or_else(|| {
                Error::degenerate("Lorentz frequency mu is undefined at c = 1; use the co-moving profile")
            })?;
            mu * (1.0 - n * n) * xi
        };
        let int = self.phi_sq_integral(xi)?;
        Ok(n * c * (lin - 2.0 * p.sigma as f64 * int) / (n * n - c * c))
    }

    /// Lorentz-frame amplitudes `(A, B)` at `xi`.
    pub fn ab(&self, xi: f64) -> Result<(C64, C64)> {
        let phi = self.phi(xi);
        let e = C64::from_polar(1.0, self.phase(xi)?);
        Ok((phi * e, self.sgn_w * phi.conj() * e))
    }

    /// Phase of the co-moving profile, with `theta(0) = 0`.
    pub fn theta(&self, y: f64) -> Result<f64> {
        let p = &self.params;
        let (n, c) = (p.nf(), p.c);
        let s2 = n * n - c * c;
        let int = self.phi_sq_integral(y / p.s())?;
        Ok(c * p.omega * y / s2 - 2.0 * p.sigma as f64 * n * c * int / s2)
    }

    /// Co-moving profile `(a, b)(Y)` with two derivatives.
    pub fn profile(&self, y: f64) -> Result<ProfilePoint> {
        let th = self.theta(y)?;
        Ok(self.profile_with_phase(y, th))
    }

    pub(crate) fn profile_with_phase(&self, y: f64, th: f64) -> ProfilePoint {
        let p = &self.params;
        let (n, c) = (p.nf(), p.c);
        let s = p.s();
        let s2 = n * n - c * c;
        let xi = y / s;
        let (f, f1, f2) = self.phi_derivs(xi);
        let sg = p.sigma as f64;
        let th1 = c * p.omega / s2 - 2.0 * sg * n * c * f.norm_sqr() / (s2 * s);
        let th2 = -2.0 * sg * n * c * 2.0 * (f.conj() * f1).re / (s2 * s * s);
        let e = C64::from_polar(1.0, th);
        let amp_b = self.sgn_w / self.alpha;
        let (g, g1, g2) = (f.conj(), f1.conj(), f2.conj());
        let d1 = |u: C64, u1: C64| u1 / s + I * th1 * u;
        let d2 = |u: C64, u1: C64, u2: C64| u2 / (s * s) + 2.0 * I * th1 * u1 / s + I * th2 * u - th1 * th1 * u;
        ProfilePoint {
            a: self.alpha * e * f,
            b: amp_b * e * g,
            da: self.alpha * e * d1(f, f1),
            db: amp_b * e * d1(g, g1),
            d2a: self.alpha * e * d2(f, f1, f2),
            d2b: amp_b * e * d2(g, g1, g2),
        }
    }

    /// Lab-frame envelopes at slow position `x` and slow time `t`.
    pub fn lab(&self, x: f64, t: f64) -> Result<(C64, C64)> {
        let pt = self.profile(x - self.params.c * t)?;
        let rot = C64::from_polar(1.0, -self.params.omega * t);
        Ok((pt.a * rot, pt.b * rot))
    }
}

pub fn soliton_phi(p: &CmeParams, xi: f64) -> Result<C64> {
    Ok(Soliton::new(p)?.phi(xi))
}

pub fn soliton_phase(p: &CmeParams, xi: f64) -> Result<f64> {
    Soliton::new(p)?.phase(xi)
}

pub fn soliton_ab(p: &CmeParams, xi: f64) -> Result<(C64, C64)> {
    Soliton::new(p)?.ab(xi)
}

/// Residual of the traveling system at a profile point.
pub fn ode_residual(p: &CmeParams, pt: &ProfilePoint) -> [C64; 2] {
    let (n, c, om, sg, w) = (p.nf(), p.c, p.omega, p.sigma as f64, p.w2n);
    let a2 = pt.a.norm_sqr();
    let b2 = pt.b.norm_sqr();
    [
        I * (n - c) * pt.da + om * pt.a - w * pt.b - sg * (a2 + 2.0 * b2) * pt.a,
        -I * (n + c) * pt.db + om * pt.b - w * pt.a - sg * (2.0 * a2 + b2) * pt.b,
    ]
}

/// Dense solution of the traveling system.
pub struct CmeTrajectory {
    pub params: CmeParams,
    pub sol: DenseSolution,
}

impl CmeTrajectory {
    pub fn at(&self, y: f64) -> [C64; 2] {
        let v = self.sol.eval(y);
        [v[0], v[1]]
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.sol.t0, self.sol.t_end)
    }

    /// CSV with columns `Y,re_a,im_a,re_b,im_b,Q,H_S` on `samples` equispaced points.
    pub fn to_csv(&self, samples: usize) -> String {
        let mut csv = Csv::new(&["Y", "re_a", "im_a", "re_b", "im_b", "Q", "H_S"]);
        let (y0, y1) = self.y_range();
        let k = samples.max(2);
        for i in 0..k {
            let y = y0 + (y1 - y0) * i as f64 / (k - 1) as f64;
            let st = self.at(y);
            let (q, h) = conserved(&self.params, st);
            csv.row_f64(&[y, st[0].re, st[0].im, st[1].re, st[1].im, q, h]);
        }
        csv.into_string()
    }
}

/// Adaptive integration; the absolute tolerance is scaled by the initial amplitude when it is below one.
pub fn integrate_cme(p: &CmeParams, init: [C64; 2], y_span: (f64, f64), tol: f64) -> Result<CmeTrajectory> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let pp = *p;
    let f = move |_y: f64, s: &[C64], d: &mut [C64]| {
        let r = cme_rhs(&pp, [s[0], s[1]]);
        d[0] = r[0];
        d[1] = r[1];
    };
    let size = init[0].norm().max(init[1].norm());
    let opts = OdeOptions { atol: if size > 0.0 { tol * size.min(1.0) } else { tol }, ..OdeOptions::with_tol(tol) };
    let sol = integrate_dense(f, y_span.0, &init, y_span.1, opts)?;
    Ok(CmeTrajectory { params: *p, sol })
}

/// Planar reduction in `(rho, theta)` with the slaved total phase; derivatives in `Y`.
/// Here `rho = |c_+|^2 = |c_-|^2` for the normal-coordinate amplitudes
/// `c_+ = sqrt(n-c) a`, `c_- = sqrt(n+c) b` on the zero-charge level.
pub fn planar_reduction_rhs(p: &CmeParams, rho: f64, theta: f64) -> Result<(f64, f64, f64)> {
    if !(rho >= 0.0) || !theta.is_finite() {
        return Err(Error::invalid(format!("planar state needs rho >= 0 and finite theta, got ({rho}, {theta})")));
    }
    let (n, c, om, w) = (p.nf(), p.c, p.omega, p.w2n);
    let sg = p.sigma as f64;
    let s = p.s();
    let (np, nm) = (n - c, n + c);
    let dh_dtheta = 4.0 * w * rho * (2.0 * theta).sin() / s;
    let dh_drho = om * (1.0 / np + 1.0 / nm)
        - 2.0 * w * (2.0 * theta).cos() / s
        - sg * rho * (1.0 / (np * np) + 4.0 / (s * s) + 1.0 / (nm * nm));
    let dh_dq = om * (1.0 / np - 1.0 / nm) - sg * rho * (1.0 / (np * np) - 1.0 / (nm * nm));
    Ok((-0.5 * dh_dtheta, 0.5 * dh_drho, 0.5 * dh_dq))
}

/// JSON summary of a parameter set and its derived quantities.
pub fn params_json(p: &CmeParams) -> serde_json::Value {
    serde_json::json!({
        "n": p.n,
        "c": p.c,
        "omega": p.omega,
        "sigma": p.sigma,
        "w2n": p.w2n,
        "s": p.s(),
        "omega0": p.omega0(),
        "mu0": p.mu0(),
        "mu": p.mu(),
    })
}
