//! Truncated Hamiltonian of the spatial-dynamics system in canonical
//! `(psi_m, phi_m)` variables and in normal coordinates `c_m^{+-}`, the
//! restriction to the resonant pair, its linearisation about the gap soliton,
//! and the first-order near-identity transformation.
//!
//! Canonical equations: `psi' = dH/d(conj phi)`, `phi' = -dH/d(conj psi)`.
//! Normal coordinates, center modes (`m <= m0`):
//! `c+' = i dH/d(conj c+)`, `c-' = -i dH/d(conj c-)`;
//! hyperbolic modes: `c+' = -dH/d(conj c-)`, `c-' = dH/d(conj c+)`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cme::{CmeParams, Soliton};
use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::potential::PotentialSpec;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Truncated model: parameters, potential, mode window and small parameter.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: CmeParams,
    pub potential: PotentialSpec,
    pub modes: ModeSet,
    pub eps: f64,
    wdiff: Vec<f64>,
    d: Vec<f64>,
}

impl Model {
    pub fn new(params: CmeParams, potential: PotentialSpec, m_max: i32, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
        }
        let w = potential.harmonic(params.n);
        if (w - params.w2n).abs() > 1e-12 * w.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "potential harmonic {} is {w} but the parameters carry w_2n = {}",
                params.n, params.w2n
            )));
        }
        let modes = ModeSet::new(params.n, m_max)?;
        let k = modes.len() as i32;
        let wdiff = (-(k - 1)..k).map(|j| potential.harmonic(j)).collect();
        let (n, c) = (params.nf(), params.c);
        let d = modes.iter().map(|m| n * n + c * c - 2.0 * c * m as f64).collect();
        Ok(Model { params, potential, modes, eps, wdiff, d })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn m(&self, i: usize) -> i32 {
        self.modes.m(i)
    }

    /// `n^2 + c^2 - 2 c m`.
    pub fn d(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn is_center(&self, i: usize) -> bool {
        self.d[i] > 0.0
    }

    /// `|n^2 + c^2 - 2 c m|^{1/4}`.
    pub fn r(&self, i: usize) -> f64 {
        self.d[i].abs().powf(0.25)
    }

    /// Coupling `w_{m_k - m_l}`.
    pub fn w(&self, k: usize, l: usize) -> f64 {
        self.wdiff[k + self.len() - 1 - l]
    }

    pub fn idx(&self, m: i32) -> Option<usize> {
        self.modes.index(m)
    }

    /// Indices of `+n` and `-n`.
    pub fn resonant(&self) -> (usize, usize) {
        let n = self.params.n;
        (self.idx(n).expect("n in window"), self.idx(-n).expect("-n in window"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalState {
    pub psi: Vec<C64>,
    pub phi: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalState {
    pub cp: Vec<C64>,
    pub cm: Vec<C64>,
}

impl CanonicalState {
    pub fn zeros(k: usize) -> Self {
        CanonicalState { psi: vec![ZERO; k], phi: vec![ZERO; k] }
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.psi.iter().chain(self.phi.iter()).copied().collect()
    }

    pub fn from_flat(v: &[C64]) -> Self {
        let k = v.len() / 2;
        CanonicalState { psi: v[..k].to_vec(), phi: v[k..].to_vec() }
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().chain(self.phi.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl NormalState {
    pub fn zeros(k: usize) -> Self {
        NormalState { cp: vec![ZERO; k], cm: vec![ZERO; k] }
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.cp.iter().chain(self.cm.iter()).copied().collect()
    }

    pub fn from_flat(v: &[C64]) -> Self {
        let k = v.len() / 2;
        NormalState { cp: v[..k].to_vec(), cm: v[k..].to_vec() }
    }
}

/// First-order form from `psi` and `psi'`: `phi = psi' - (i/2)(c - m) psi`.
pub fn to_first_order(model: &Model, psi: &[C64], dpsi: &[C64]) -> Result<CanonicalState> {
    if psi.len() != model.len() || dpsi.len() != model.len() {
        return Err(Error::invalid(format!("expected {} modes", model.len())));
    }
    let c = model.params.c;
    let phi = (0..model.len()).map(|i| dpsi[i] - 0.5 * I * (c - model.m(i) as f64) * psi[i]).collect();
    Ok(CanonicalState { psi: psi.to_vec(), phi })
}

/// Trilinear convolution `N(p, q, r)_k = sum_{a,b} p_a conj(q_b) r_{k-a+b}`
/// restricted to the window.
pub fn trilinear(p: &[C64], q: &[C64], r: &[C64]) -> Vec<C64> {
    let k = p.len();
    let ki = k as isize;
    let mut corr = vec![ZERO; 2 * k - 1];
    for j in -(ki - 1)..ki {
        let mut s = ZERO;
        for a in 0.max(-j)..ki.min(ki - j) {
            s += p[a as usize] * q[(a + j) as usize].conj();
        }
        corr[(j + ki - 1) as usize] = s;
    }
    let mut out = vec![ZERO; k];
    for (kk, o) in out.iter_mut().enumerate() {
        let kk = kk as isize;
        let mut s = ZERO;
        for j in (-kk).max(-(ki - 1))..(ki - kk) {
            s += corr[(j + ki - 1) as usize] * r[(kk + j) as usize];
        }
        *o = s;
    }
    out
}

pub fn cubic(psi: &[C64]) -> Vec<C64> {
    trilinear(psi, psi, psi)
}

pub fn eval_h(model: &Model, st: &CanonicalState) -> f64 {
    let p = &model.params;
    let (c, eps, om, sg) = (p.c, model.eps, p.omega, p.sigma as f64);
    let k = model.len();
    let mut h = 0.0;
    for i in 0..k {
        let (ps, ph) = (st.psi[i], st.phi[i]);
        let m = model.m(i) as f64;
        h += ph.norm_sqr() + 0.25 * model.d(i) * ps.norm_sqr();
        h += (0.5 * I * (c - m) * (ps * ph.conj() - ps.conj() * ph)).re;
        h += eps * om * ps.norm_sqr();
    }
    let mut hw = 0.0;
    for i in 0..k {
        for l in 0..k {
            hw += model.w(i, l) * (st.psi[l] * st.psi[i].conj()).re;
        }
    }
    let n3 = cubic(&st.psi);
    let h4: f64 = (0..k).map(|i| (st.psi[i].conj() * n3[i]).re).sum();
    h - eps * hw - 0.5 * eps * sg * h4
}

/// Canonical vector field `(psi', phi')`.
pub fn canonical_rhs(model: &Model, st: &CanonicalState) -> CanonicalState {
    let p = &model.params;
    let (c, eps, om, sg) = (p.c, model.eps, p.omega, p.sigma as f64);
    let k = model.len();
    let n3 = cubic(&st.psi);
    let mut out = CanonicalState::zeros(k);
    for i in 0..k {
        let m = model.m(i) as f64;
        let rot = 0.5 * I * (c - m);
        let mut wsum = ZERO;
        for l in 0..k {
            wsum += model.w(i, l) * st.psi[l];
        }
        out.psi[i] = st.phi[i] + rot * st.psi[i];
        out.phi[i] =
            -0.25 * model.d(i) * st.psi[i] + rot * st.phi[i] - eps * om * st.psi[i] + eps * wsum + eps * sg * n3[i];
    }
    out
}

/// Conserved charge of the gauge symmetry, `sum_m i(psi conj(phi) - conj(psi) phi)`.
pub fn gauge_charge(st: &CanonicalState) -> f64 {
    st.psi.iter().zip(&st.phi).map(|(ps, ph)| (I * (ps * ph.conj() - ps.conj() * ph)).re).sum()
}

/// Spatial reversibility `(psi, phi)(y) -> (conj psi, -conj phi)(-y)` acting on a state.
pub fn reverse(st: &CanonicalState) -> CanonicalState {
    CanonicalState { psi: st.psi.iter().map(|z| z.conj()).collect(), phi: st.phi.iter().map(|z| -z.conj()).collect() }
}

pub fn to_normal(model: &Model, st: &CanonicalState) -> NormalState {
    let k = model.len();
    let mut out = NormalState::zeros(k);
    for i in 0..k {
        let r = model.r(i);
        let (ps, ph) = (st.psi[i], st.phi[i]);
        if model.is_center(i) {
            out.cp[i] = 0.5 * (r * ps - 2.0 * I * ph / r);
            out.cm[i] = 0.5 * (r * ps + 2.0 * I * ph / r);
        } else {
            out.cp[i] = 0.5 * (r * ps + 2.0 * ph / r);
            out.cm[i] = 0.5 * (r * ps - 2.0 * ph / r);
        }
    }
    out
}

pub fn from_normal(model: &Model, ns: &NormalState) -> CanonicalState {
    let k = model.len();
    let mut out = CanonicalState::zeros(k);
    for i in 0..k {
        let r = model.r(i);
        let (p, m) = (ns.cp[i], ns.cm[i]);
        out.psi[i] = (p + m) / r;
        out.phi[i] = if model.is_center(i) { 0.5 * I * r * (p - m) } else { 0.5 * r * (p - m) };
    }
    out
}

/// Vector field in normal coordinates, obtained by transforming the canonical one.
pub fn normal_rhs(model: &Model, ns: &NormalState) -> NormalState {
    to_normal(model, &canonical_rhs(model, &from_normal(model, ns)))
}

/// Builds the normal-coordinate vector field from Wirtinger gradients
/// `dH/d(conj c+)`, `dH/d(conj c-)`.
pub fn normal_field_from_gradient(model: &Model, gp: &[C64], gm: &[C64]) -> NormalState {
    let k = model.len();
    let mut out = NormalState::zeros(k);
    for i in 0..k {
        if model.is_center(i) {
            out.cp[i] = I * gp[i];
            out.cm[i] = -I * gm[i];
        } else {
            out.cp[i] = -gm[i];
            out.cm[i] = gp[i];
        }
    }
    out
}

/// Per-mode coefficients of the normal-form Hamiltonian.
#[derive(Clone, Debug, Serialize)]
pub struct ModeCoefficients {
    pub m: i32,
    pub center: bool,
    pub r: f64,
    /// `k^{+-}` for center modes.
    pub k: Option<(f64, f64)>,
    /// `kappa^{+-}` for hyperbolic modes.
    pub kappa: Option<(C64, C64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientTable {
    pub n: i32,
    pub c: f64,
    pub modes: Vec<ModeCoefficients>,
    #[serde(skip)]
    w: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn new(model: &Model) -> Self {
        let (n, c) = (model.params.nf(), model.params.c);
        let k = model.len();
        let modes = (0..k)
            .map(|i| {
                let m = model.m(i) as f64;
                let root = model.d(i).abs().sqrt();
                if model.is_center(i) {
                    ModeCoefficients {
                        m: model.m(i),
                        center: true,
                        r: model.r(i),
                        k: Some(((c - m + root) / 2.0, (c - m - root) / 2.0)),
                        kappa: None,
                    }
                } else {
                    let base = I * (c - m);
                    ModeCoefficients {
                        m: model.m(i),
                        center: false,
                        r: model.r(i),
                        k: None,
                        kappa: Some(((base + root) / 2.0, (base - root) / 2.0)),
                    }
                }
            })
            .collect::<Vec<_>>();
        let _ = n;
        let w = (0..k).map(|i| (0..k).map(|l| model.w(i, l) / (model.r(i) * model.r(l))).collect()).collect();
        CoefficientTable { n: model.params.n, c, modes, w }
    }

    /// `w_{m, m1} = w_{m - m1} / (|d_m| |d_m1|)^{1/4}` by window index.
    pub fn w_mm1(&self, i: usize, l: usize) -> f64 {
        self.w[i][l]
    }

    /// `g` for window indices of `m`, `m1`, `-m2` and `m - m1 - m2`.
    pub fn g(&self, i: usize, a: usize, b: usize, c: usize) -> f64 {
        1.0 / (self.modes[i].r * self.modes[a].r * self.modes[b].r * self.modes[c].r)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialises")
    }
}

/// Normal-form Hamiltonian evaluated term by term from the coefficient table.
pub fn eval_h_normal(model: &Model, table: &CoefficientTable, ns: &NormalState) -> f64 {
    let p = &model.params;
    let (eps, om, sg) = (model.eps, p.omega, p.sigma as f64);
    let k = model.len();
    let mut h = 0.0;
    for (i, mc) in table.modes.iter().enumerate() {
        let (cp, cm) = (ns.cp[i], ns.cm[i]);
        if let Some((kp, km)) = mc.k {
            h += kp * cp.norm_sqr() - km * cm.norm_sqr();
        } else if let Some((kap, kam)) = mc.kappa {
            h += (kam * cm * cp.conj() - kap * cp * cm.conj()).re;
        }
        h += eps * om * (cp + cm).norm_sqr() / (mc.r * mc.r);
    }
    let u: Vec<C64> = (0..k).map(|i| ns.cp[i] + ns.cm[i]).collect();
    let mut hw = 0.0;
    for i in 0..k {
        for l in 0..k {
            hw += table.w_mm1(i, l) * (u[l] * u[i].conj()).re;
        }
    }
    let mut h4 = ZERO;
    let ki = k as isize;
    for i in 0..ki {
        for a in 0..ki {
            for b in 0..ki {
                let cc = i - a + b;
                if !(0..ki).contains(&cc) {
                    continue;
                }
                let (iu, au, bu, cu) = (i as usize, a as usize, b as usize, cc as usize);
                h4 += table.g(iu, au, bu, cu) * u[au] * u[bu].conj() * u[cu] * u[iu].conj();
            }
        }
    }
    h - eps * hw - 0.5 * eps * sg * h4.re
}

/// Resonant-pair Hamiltonian (divided by `eps`) in `c+ = c_n^+`, `c- = c_{-n}^-`.
pub fn restricted_h(p: &CmeParams, cp: C64, cm: C64) -> f64 {
    let (n, c, om, w, sg) = (p.nf(), p.c, p.omega, p.w2n, p.sigma as f64);
    let s2 = n * n - c * c;
    let (pp, mm) = (cp.norm_sqr(), cm.norm_sqr());
    om * pp / (n - c) + om * mm / (n + c)
        - w * 2.0 * (cp.conj() * cm).re / s2.sqrt()
        - 0.5 * sg * (pp * pp / (n - c).powi(2) + 4.0 * pp * mm / s2 + mm * mm / (n + c).powi(2))
}

/// Normal coordinates of the resonant pair from the envelopes `(a, b)`.
pub fn resonant_from_envelopes(p: &CmeParams, a: C64, b: C64) -> (C64, C64) {
    let (n, c) = (p.nf(), p.c);
    ((n - c).sqrt() * a, (n + c).sqrt() * b)
}

/// Linearisation of the resonant-pair flow (in `Y`) acting on
/// `(c+, c-, conj c+, conj c-)`.
pub fn lambda_h(p: &CmeParams, cp: C64, cm: C64) -> Matrix4<C64> {
    let (n, c, om, w, sg) = (p.nf(), p.c, p.omega, p.w2n, p.sigma as f64);
    let s2 = n * n - c * c;
    let s = s2.sqrt();
    let (np, nm) = (n - c, n + c);
    let (pp, mm) = (cp.norm_sqr(), cm.norm_sqr());
    let r1 = [
        C64::from(om / np - 2.0 * sg * pp / (np * np) - 2.0 * sg * mm / s2),
        -w / s - 2.0 * sg * cp * cm.conj() / s2,
        -sg * cp * cp / (np * np),
        -2.0 * sg * cp * cm / s2,
    ];
    let r2 = [
        w / s + 2.0 * sg * cp.conj() * cm / s2,
        C64::from(-om / nm + 2.0 * sg * mm / (nm * nm) + 2.0 * sg * pp / s2),
        2.0 * sg * cp * cm / s2,
        sg * cm * cm / (nm * nm),
    ];
    let mut l = Matrix4::zeros();
    for j in 0..4 {
        l[(0, j)] = I * r1[j];
        l[(1, j)] = I * r2[j];
    }
    for j in 0..4 {
        l[(2, j)] = l[(0, (j + 2) % 4)].conj();
        l[(3, j)] = l[(1, (j + 2) % 4)].conj();
    }
    l
}

/// Eigenvalues of the linearisation at the origin, sorted by (re, im).
pub fn lambda_h_spectrum(p: &CmeParams) -> Result<[C64; 4]> {
    let l = lambda_h(p, ZERO, ZERO);
    let ev = l.schur().eigenvalues().ok_or_else(|| Error::numerical("Schur decomposition did not converge"))?;
    let mut out = [ev[0], ev[1], ev[2], ev[3]];
    sort_c(&mut out);
    Ok(out)
}

/// Closed-form eigenvalues at the origin: `(i Omega c +- sqrt(s^2 w^2 - n^2 Omega^2)) / s^2`
/// and their conjugates.
pub fn lambda_h_predicted(p: &CmeParams) -> [C64; 4] {
    let (n, c, om, w) = (p.nf(), p.c, p.omega, p.w2n);
    let s2 = n * n - c * c;
    let root = C64::from(s2 * w * w - n * n * om * om).sqrt();
    let k1 = (I * om * c + root) / s2;
    let k2 = (I * om * c - root) / s2;
    let mut out = [k1, k2, k1.conj(), k2.conj()];
    sort_c(&mut out);
    out
}

fn sort_c(v: &mut [C64]) {
    v.sort_by(|a, b| {
        let ka = ((a.re * 1e9).round(), (a.im * 1e9).round());
        let kb = ((b.re * 1e9).round(), (b.im * 1e9).round());
        ka.partial_cmp(&kb).unwrap()
    });
}

/// Soliton in resonant normal coordinates: `(c0, dc0/dY, d2c0/dY2)`,
/// each as `(c+, c-, conj c+, conj c-)`.
pub fn soliton_normal(sol: &Soliton, y: f64) -> Result<[Vector4<C64>; 3]> {
    let p = &sol.params;
    let pt = sol.profile(y)?;
    let (n, c) = (p.nf(), p.c);
    let (sp, sm) = ((n - c).sqrt(), (n + c).sqrt());
    let v = |a: C64, b: C64| Vector4::new(sp * a, sm * b, sp * a.conj(), sm * b.conj());
    Ok([v(pt.a, pt.b), v(pt.da, pt.db), v(pt.d2a, pt.d2b)])
}

/// Kernel of the linearised operator and of its adjoint along the soliton, with
/// their `y` derivatives: `[(s1, s1'), (s2, s2'), (s1*, s1*'), (s2*, s2*')]`.
pub fn kernel_modes(sol: &Soliton, eps: f64, y: f64) -> Result<[(Vector4<C64>, Vector4<C64>); 4]> {
    let [c0, d1, d2] = soliton_normal(sol, eps * y)?;
    let s1 = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, -1.0).map(C64::from));
    let s2 = Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, 1.0).map(C64::from));
    let s3 = Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, 1.0, -1.0).map(C64::from));
    let e = C64::from(eps);
    let e2 = C64::from(eps * eps);
    Ok([(d1 * e, d2 * e2), (s1 * c0, s1 * d1 * e), (s2 * d1 * e, s2 * d2 * e2), (s3 * c0, s3 * d1 * e)])
}

/// Residuals `|s' - eps L s|` for the kernel and `|s*' + eps L^H s*|` for the adjoint kernel.
pub fn kernel_residuals(sol: &Soliton, eps: f64, y: f64) -> Result<[f64; 4]> {
    let [c0, _, _] = soliton_normal(sol, eps * y)?;
    let l = lambda_h(&sol.params, c0[0], c0[1]) * C64::from(eps);
    let lh = l.adjoint();
    let ks = kernel_modes(sol, eps, y)?;
    Ok([
        (ks[0].1 - l * ks[0].0).norm(),
        (ks[1].1 - l * ks[1].0).norm(),
        (ks[2].1 + lh * ks[2].0).norm(),
        (ks[3].1 + lh * ks[3].0).norm(),
    ])
}

/// `dH_1/d(conj c_m^{+-})` at a state supported on the resonant pair, where
/// `eps H_1` collects the potential, detuning and quartic terms.
fn resonant_forcing(model: &Model, cp: C64, cm: C64, dcp: C64, dcm: C64) -> (Vec<C64>, Vec<C64>) {
    let p = &model.params;
    let (om, sg) = (p.omega, p.sigma as f64);
    let k = model.len();
    let (ip, im) = model.resonant();
    let mut psi = vec![ZERO; k];
    psi[ip] = cp / model.r(ip);
    psi[im] = cm / model.r(im);
    let mut dpsi = vec![ZERO; k];
    dpsi[ip] = dcp / model.r(ip);
    dpsi[im] = dcm / model.r(im);
    let n3 = cubic(&psi);
    let dn3: Vec<C64> = {
        let a = trilinear(&dpsi, &psi, &psi);
        let b = trilinear(&psi, &dpsi, &psi);
        let c = trilinear(&psi, &psi, &dpsi);
        (0..k).map(|i| a[i] + b[i] + c[i]).collect()
    };
    let mut f = vec![ZERO; k];
    let mut df = vec![ZERO; k];
    for i in 0..k {
        let mut ws = ZERO;
        let mut dws = ZERO;
        for l in [ip, im] {
            ws += model.w(i, l) * psi[l];
            dws += model.w(i, l) * dpsi[l];
        }
        f[i] = (om * psi[i] - ws - sg * n3[i]) / model.r(i);
        df[i] = (om * dpsi[i] - dws - sg * dn3[i]) / model.r(i);
    }
    (f, df)
}

/// Which normal-coordinate components belong to the resonant pair.
pub fn is_resonant_component(model: &Model, i: usize, plus: bool) -> bool {
    let (ip, im) = model.resonant();
    (plus && i == ip) || (!plus && i == im)
}

fn shift_coefficients(model: &Model, table: &CoefficientTable) -> Result<(Vec<C64>, Vec<C64>)> {
    let k = model.len();
    let mut sp = vec![ZERO; k];
    let mut sm = vec![ZERO; k];
    for (i, mc) in table.modes.iter().enumerate() {
        let (dp, dm) = match (mc.k, mc.kappa) {
            (Some((kp, km)), _) => (C64::from(kp), C64::from(-km)),
            (_, Some((kap, kam))) => (-kap, kam),
            _ => unreachable!(),
        };
        for (plus, d, slot) in [(true, dp, &mut sp[i]), (false, dm, &mut sm[i])] {
            if is_resonant_component(model, i, plus) {
                continue;
            }
            if d.norm() < 1e-10 {
                return Err(Error::degenerate(format!(
                    "vanishing divisor for mode {} ({})",
                    mc.m,
                    if plus { "+" } else { "-" }
                )));
            }
            *slot = 1.0 / d;
        }
    }
    Ok((sp, sm))
}

/// First-order near-identity change of variables removing the `O(eps)`
/// forcing of every non-resonant component by the resonant pair.
pub fn near_identity(model: &Model, ns: &NormalState) -> Result<NormalState> {
    let table = CoefficientTable::new(model);
    let (sp, sm) = shift_coefficients(model, &table)?;
    let (ip, im) = model.resonant();
    let (f, _) = resonant_forcing(model, ns.cp[ip], ns.cm[im], ZERO, ZERO);
    let e = model.eps;
    let mut out = ns.clone();
    for i in 0..model.len() {
        out.cp[i] += e * sp[i] * f[i];
        out.cm[i] += e * sm[i] * f[i];
    }
    Ok(out)
}

/// Inverse of [`near_identity`] (exact, since the shift depends only on the resonant pair).
pub fn near_identity_inverse(model: &Model, ns: &NormalState) -> Result<NormalState> {
    let table = CoefficientTable::new(model);
    let (sp, sm) = shift_coefficients(model, &table)?;
    let (ip, im) = model.resonant();
    let (f, _) = resonant_forcing(model, ns.cp[ip], ns.cm[im], ZERO, ZERO);
    let e = model.eps;
    let mut out = ns.clone();
    for i in 0..model.len() {
        out.cp[i] -= e * sp[i] * f[i];
        out.cm[i] -= e * sm[i] * f[i];
    }
    Ok(out)
}

/// Vector field in the transformed variables.
pub fn transformed_rhs(model: &Model, nt: &NormalState) -> Result<NormalState> {
    let table = CoefficientTable::new(model);
    let (sp, sm) = shift_coefficients(model, &table)?;
    let ns = near_identity_inverse(model, nt)?;
    let v = normal_rhs(model, &ns);
    let (ip, im) = model.resonant();
    let (_, df) = resonant_forcing(model, ns.cp[ip], ns.cm[im], v.cp[ip], v.cm[im]);
    let e = model.eps;
    let mut out = v;
    for i in 0..model.len() {
        out.cp[i] += e * sp[i] * df[i];
        out.cm[i] += e * sm[i] * df[i];
    }
    Ok(out)
}

/// Frobenius norm of the block of the linearised vector field coupling the
/// non-resonant center components to the resonant pair, at the state carrying
/// `(cp, cm)` on the pair and zero elsewhere. With `transformed = false` the
/// original coordinates are used.
pub fn center_coupling_norm(model: &Model, cp: C64, cm: C64, transformed: bool) -> Result<f64> {
    let k = model.len();
    let (ip, im) = model.resonant();
    let field = |ns: &NormalState| -> Result<NormalState> {
        if transformed {
            transformed_rhs(model, ns)
        } else {
            Ok(normal_rhs(model, ns))
        }
    };
    let h = 1e-5;
    let dirs = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
    let mut total = 0.0;
    for slot in 0..2 {
        for d in dirs {
            let mut plus = NormalState::zeros(k);
            let mut minus = NormalState::zeros(k);
            plus.cp[ip] = cp;
            plus.cm[im] = cm;
            minus.cp[ip] = cp;
            minus.cm[im] = cm;
            if slot == 0 {
                plus.cp[ip] += h * d;
                minus.cp[ip] -= h * d;
            } else {
                plus.cm[im] += h * d;
                minus.cm[im] -= h * d;
            }
            let (fp, fm) = (field(&plus)?, field(&minus)?);
            for i in 0..k {
                if !model.is_center(i) {
                    continue;
                }
                for (plus_c, a, b) in [(true, fp.cp[i], fm.cp[i]), (false, fp.cm[i], fm.cm[i])] {
                    if is_resonant_component(model, i, plus_c) {
                        continue;
                    }
                    total += ((a - b) / (2.0 * h)).norm_sqr();
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// Seeded random canonical states with entries uniform in the square of half-width `scale`.
pub fn random_states(model: &Model, count: usize, scale: f64, seed: u64) -> Vec<CanonicalState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.len();
    (0..count)
        .map(|_| {
            let mut z = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
            let psi = (0..k).map(|_| z()).collect();
            let phi = (0..k).map(|_| z()).collect();
            CanonicalState { psi, phi }
        })
        .collect()
}

/// Worst discrepancies of [`check_hamiltonian`].
#[derive(Clone, Debug, Serialize)]
pub struct HamiltonianCheck {
    pub states: usize,
    pub modes: usize,
    pub fd_step: f64,
    /// `|H - H_normal| / max(1, |H|)`.
    pub h_mismatch: f64,
    /// Canonical field against central differences of `H`.
    pub canonical_gradient_error: f64,
    /// Normal-coordinate field against central differences of `H_normal`.
    pub normal_gradient_error: f64,
}

fn wirtinger<S: Clone>(
    f: impl Fn(&S) -> f64,
    st: &S,
    slots: usize,
    get: impl Fn(&mut S, usize) -> &mut C64,
    h: f64,
) -> Vec<C64> {
    (0..slots)
        .map(|j| {
            let mut d = [0.0; 2];
            for (k, dir) in [C64::new(1.0, 0.0), I].into_iter().enumerate() {
                let mut a = st.clone();
                let mut b = st.clone();
                *get(&mut a, j) += h * dir;
                *get(&mut b, j) -= h * dir;
                d[k] = (f(&a) - f(&b)) / (2.0 * h);
            }
            0.5 * C64::new(d[0], d[1])
        })
        .collect()
}

/// Compares the two Hamiltonian evaluations and checks both vector fields
/// against finite-difference Wirtinger gradients with step `h`.
pub fn check_hamiltonian(model: &Model, states: &[CanonicalState], h: f64) -> Result<HamiltonianCheck> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let k = model.len();
    if let Some(bad) = states.iter().find(|s| s.psi.len() != k || s.phi.len() != k) {
        return Err(Error::invalid(format!("state has {} modes, model has {k}", bad.psi.len())));
    }
    let table = CoefficientTable::new(model);
    let mut out = HamiltonianCheck {
        states: states.len(),
        modes: k,
        fd_step: h,
        h_mismatch: 0.0,
        canonical_gradient_error: 0.0,
        normal_gradient_error: 0.0,
    };
    for st in states {
        let ns = to_normal(model, st);
        let h1 = eval_h(model, st);
        let h2 = eval_h_normal(model, &table, &ns);
        out.h_mismatch = out.h_mismatch.max((h1 - h2).abs() / h1.abs().max(1.0));

        let f = |s: &CanonicalState| eval_h(model, s);
        let g_psi = wirtinger(f, st, k, |s, j| &mut s.psi[j], h);
        let g_phi = wirtinger(f, st, k, |s, j| &mut s.phi[j], h);
        let rhs = canonical_rhs(model, st);
        for j in 0..k {
            out.canonical_gradient_error =
                out.canonical_gradient_error.max((rhs.psi[j] - g_phi[j]).norm()).max((rhs.phi[j] + g_psi[j]).norm());
        }

        let fh = |s: &NormalState| eval_h_normal(model, &table, s);
        let gp = wirtinger(fh, &ns, k, |s, j| &mut s.cp[j], h);
        let gm = wirtinger(fh, &ns, k, |s, j| &mut s.cm[j], h);
        let from_grad = normal_field_from_gradient(model, &gp, &gm);
        let direct = normal_rhs(model, &ns);
        for j in 0..k {
            out.normal_gradient_error = out
                .normal_gradient_error
                .max((from_grad.cp[j] - direct.cp[j]).norm())
                .max((from_grad.cm[j] - direct.cm[j]).norm());
        }
    }
    Ok(out)
}
