//! Spatial eigenvalues of the linearised traveling-wave problem, their
//! classification, resonances, and the dispersion relations of three related
//! lattice and continuum models.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_csv, Csv};
use crate::modes::floor_parity;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const CLASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootClass {
    Stable,
    Unstable,
    CenterPlus,
    CenterMinus,
}

impl RootClass {
    pub fn label(self) -> &'static str {
        match self {
            RootClass::Stable => "stable",
            RootClass::Unstable => "unstable",
            RootClass::CenterPlus => "center+",
            RootClass::CenterMinus => "center-",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "stable" => RootClass::Stable,
            "unstable" => RootClass::Unstable,
            "center+" => RootClass::CenterPlus,
            "center-" => RootClass::CenterMinus,
            _ => return Err(Error::invalid(format!("unknown root class '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootEntry {
    pub m: i32,
    pub kappa_plus: C64,
    pub kappa_minus: C64,
    pub class_plus: RootClass,
    pub class_minus: RootClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootAtlas {
    pub n: i32,
    pub c: f64,
    pub m0: i32,
    pub m1: i32,
    pub entries: Vec<RootEntry>,
}

fn check_nc(n: i32, c: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid(format!("n must be >= 1, got {n}")));
    }
    if !c.is_finite() || c <= 0.0 || c >= n as f64 {
        return Err(Error::invalid(format!("velocity c = {c} outside (0, n) with n = {n}")));
    }
    Ok(())
}

/// Largest mode with purely imaginary roots.
pub fn m0(n: i32, c: f64) -> Result<i32> {
    check_nc(n, c)?;
    Ok(floor_parity((f64::from(n * n) + c * c) / (2.0 * c), n))
}

/// Mode below which `k_m^-` stops decreasing as `m` decreases.
pub fn m1(n: i32, c: f64) -> Result<i32> {
    check_nc(n, c)?;
    Ok(floor_parity(f64::from(n * n) / (2.0 * c), n))
}

/// Discriminant `2cm - n^2 - c^2` of the mode-`m` quadratic.
fn disc(n: i32, c: f64, m: i32) -> f64 {
    2.0 * c * m as f64 - f64::from(n * n) - c * c
}

/// The two roots of `kappa^2 + i(m - c) kappa + (n^2 - m^2)/4 = 0`.
pub fn roots(n: i32, c: f64, m: i32) -> Result<(C64, C64)> {
    check_nc(n, c)?;
    if (m - n).rem_euclid(2) != 0 {
        return Err(Error::invalid(format!("m = {m} does not share the parity of n = {n}")));
    }
    let d = disc(n, c, m);
    if d.abs() <= 1e-12 * (f64::from(n * n) + c * c) {
        return Err(Error::degenerate(format!("double root at m = {m}")));
    }
    let sq = if d >= 0.0 { C64::new(d.sqrt(), 0.0) } else { C64::new(0.0, (-d).sqrt()) };
    let base = I * (c - m as f64);
    Ok(((base + sq) * 0.5, (base - sq) * 0.5))
}

/// Residual of the mode quadratic at `kappa`.
pub fn quadratic_residual(n: i32, c: f64, m: i32, kappa: C64) -> C64 {
    kappa * kappa + I * (m as f64 - c) * kappa + f64::from(n * n - m * m) / 4.0
}

/// `k_m^{+-}` for a center mode: the roots are `i k`.
pub fn center_wavenumbers(n: i32, c: f64, m: i32) -> (f64, f64) {
    let r = (-disc(n, c, m)).sqrt();
    ((c - m as f64 + r) / 2.0, (c - m as f64 - r) / 2.0)
}

fn classify(k: C64, center_plus: bool) -> RootClass {
    if k.re > CLASS_TOL {
        RootClass::Unstable
    } else if k.re < -CLASS_TOL {
        RootClass::Stable
    } else if center_plus {
        RootClass::CenterPlus
    } else {
        RootClass::CenterMinus
    }
}

pub fn root_atlas(n: i32, c: f64, m_range: (i32, i32)) -> Result<RootAtlas> {
    check_nc(n, c)?;
    let (lo, hi) = m_range;
    let mut entries = Vec::new();
    for m in lo..=hi {
        if (m - n).rem_euclid(2) != 0 {
            continue;
        }
        let (kp, km) = roots(n, c, m)?;
        entries.push(RootEntry {
            m,
            kappa_plus: kp,
            kappa_minus: km,
            class_plus: classify(kp, true),
            class_minus: classify(km, false),
        });
    }
    Ok(RootAtlas { n, c, m0: m0(n, c)?, m1: m1(n, c)?, entries })
}

impl RootAtlas {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["m", "re_kp", "im_kp", "re_km", "im_km", "class"]);
        for e in &self.entries {
            csv.row_str(&[
                e.m.to_string(),
                fmt_f64(e.kappa_plus.re),
                fmt_f64(e.kappa_plus.im),
                fmt_f64(e.kappa_minus.re),
                fmt_f64(e.kappa_minus.im),
                format!("{}/{}", e.class_plus.label(), e.class_minus.label()),
            ]);
        }
        csv.into_string()
    }

    /// Reads entries back from [`RootAtlas::to_csv`] output.
    pub fn entries_from_csv(text: &str) -> Result<Vec<RootEntry>> {
        let (header, rows) = read_csv(text)?;
        if header != ["m", "re_kp", "im_kp", "re_km", "im_km", "class"] {
            return Err(Error::invalid("unexpected atlas header"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{s}'")));
        rows.iter()
            .map(|r| {
                let (cp, cm) = r[5].split_once('/').ok_or_else(|| Error::invalid("bad class field"))?;
                Ok(RootEntry {
                    m: r[0].parse().map_err(|_| Error::invalid(format!("bad mode '{}'", r[0])))?,
                    kappa_plus: C64::new(num(&r[1])?, num(&r[2])?),
                    kappa_minus: C64::new(num(&r[3])?, num(&r[4])?),
                    class_plus: RootClass::parse(cp)?,
                    class_minus: RootClass::parse(cm)?,
                })
            })
            .collect()
    }
}

/// A coincidence of purely imaginary roots from two distinct center modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub m: i32,
    pub l: i32,
    pub kappa: C64,
}

/// Pairs `m > l` of center modes whose roots coincide, found from the
/// integer condition `(m - l)^2 + 4c(m + l) - 4n^2 = 0` and confirmed
/// against the atlas.
pub fn resonance_scan(n: i32, c: f64, m_range: (i32, i32)) -> Result<Vec<Resonance>> {
    let atlas = root_atlas(n, c, m_range)?;
    let center: Vec<&RootEntry> = atlas.entries.iter().filter(|e| e.m <= atlas.m0).collect();
    let scale = 4.0 * f64::from(n * n) + 1.0;
    let mut out = Vec::new();
    for (i, em) in center.iter().enumerate() {
        for el in &center[..i] {
            let (m, l) = (em.m, el.m);
            let d = (m - l) as f64;
            let res = d * d + 4.0 * c * (m + l) as f64 - 4.0 * f64::from(n * n);
            if res.abs() <= 1e-12 * scale * (1.0 + d * d) {
                out.push(Resonance { m, l, kappa: C64::new(0.0, -(m + l) as f64 / 4.0) });
            }
        }
    }
    out.sort_by(|a, b| b.m.cmp(&a.m).then(b.l.cmp(&a.l)));

    let collisions = root_collisions(&center, 1e-10);
    if collisions.len() != out.len() || collisions.iter().any(|p| !out.iter().any(|r| (r.m, r.l) == *p)) {
        return Err(Error::numerical(format!(
            "resonance condition and root collisions disagree: {:?} vs {:?}",
            out.iter().map(|r| (r.m, r.l)).collect::<Vec<_>>(),
            collisions
        )));
    }
    for r in &out {
        let hit = [em_root(&center, r.m), em_root(&center, r.l)];
        if !hit[0].iter().any(|k| hit[1].iter().any(|q| (k - q).norm() < 1e-10 && (k - r.kappa).norm() < 1e-10)) {
            return Err(Error::numerical(format!("resonance ({}, {}) not at the predicted root", r.m, r.l)));
        }
    }
    Ok(out)
}

fn em_root(center: &[&RootEntry], m: i32) -> Vec<C64> {
    center.iter().filter(|e| e.m == m).flat_map(|e| [e.kappa_plus, e.kappa_minus]).collect()
}

fn root_collisions(center: &[&RootEntry], tol: f64) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for (i, a) in center.iter().enumerate() {
        for b in &center[..i] {
            let hit = [a.kappa_plus, a.kappa_minus]
                .iter()
                .any(|x| [b.kappa_plus, b.kappa_minus].iter().any(|y| (x - y).norm() < tol));
            if hit {
                out.push((a.m.max(b.m), a.m.min(b.m)));
            }
        }
    }
    out
}

pub fn resonances_to_csv(list: &[Resonance]) -> String {
    let mut csv = Csv::new(&["m", "l", "re_kappa", "im_kappa"]);
    for r in list {
        csv.row_str(&[r.m.to_string(), r.l.to_string(), fmt_f64(r.kappa.re), fmt_f64(r.kappa.im)]);
    }
    csv.into_string()
}

/// Outcome of the monotonicity check on center wavenumbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub kplus_ok: bool,
    pub kminus_upper_ok: bool,
    pub kminus_lower_ok: bool,
    pub violations: Vec<i32>,
}

impl MonotonicityReport {
    pub fn ok(&self) -> bool {
        self.kplus_ok && self.kminus_upper_ok && self.kminus_lower_ok
    }
}

/// As `m` decreases over the center range, `k^+` increases; `k^-` decreases
/// on `(m1, m0]` and increases for `m <= m1`.
pub fn check_monotonicity(atlas: &RootAtlas) -> MonotonicityReport {
    let mut centers: Vec<(i32, f64, f64)> =
        atlas.entries.iter().filter(|e| e.m <= atlas.m0).map(|e| (e.m, e.kappa_plus.im, e.kappa_minus.im)).collect();
    centers.sort_by_key(|t| -t.0);
    let mut rep =
        MonotonicityReport { kplus_ok: true, kminus_upper_ok: true, kminus_lower_ok: true, violations: vec![] };
    for w in centers.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        if lo.1 <= hi.1 {
            rep.kplus_ok = false;
            rep.violations.push(lo.0);
        }
        if lo.0 > atlas.m1 && lo.2 >= hi.2 {
            rep.kminus_upper_ok = false;
            rep.violations.push(lo.0);
        }
        if hi.0 <= atlas.m1 && lo.2 <= hi.2 {
            rep.kminus_lower_ok = false;
            rep.violations.push(lo.0);
        }
    }
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    KleinGordon,
    RegularizedGp,
    DiscreteGp,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kg" | "klein-gordon" => Ok(Model::KleinGordon),
            "reggp" | "regularized-gp" => Ok(Model::RegularizedGp),
            "discretegp" | "discrete-gp" => Ok(Model::DiscreteGp),
            _ => Err(Error::invalid(format!("unknown model '{s}' (kg, reggp, discretegp)"))),
        }
    }
}

fn kg_coeffs(om: f64, c: f64, m: f64) -> [C64; 3] {
    [C64::new(1.0 - c * c, 0.0), I * (m - 2.0 * c * om), C64::new(om - m * m / 4.0, 0.0)]
}

fn reg_coeffs(om: f64, c: f64, m: f64) -> [C64; 4] {
    [
        -I * c,
        C64::new(om - 1.0 + m * c, 0.0),
        I * (c - m + m * om + m * m * c / 4.0),
        C64::new(-om + m * m / 4.0 * (1.0 - om), 0.0),
    ]
}

fn poly(coef: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &a in coef {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Characteristic function and its derivative.
pub fn model_function(model: Model, omega: f64, c: f64, m: i32, kappa: C64) -> (C64, C64) {
    let mf = m as f64;
    match model {
        Model::KleinGordon => poly(&kg_coeffs(omega, c, mf), kappa),
        Model::RegularizedGp => poly(&reg_coeffs(omega, c, mf), kappa),
        Model::DiscreteGp => {
            let z = kappa + I * (mf / 2.0);
            (omega - I * c * kappa + 2.0 * z.cosh(), -I * c + 2.0 * z.sinh())
        }
    }
}

pub fn model_residual(model: Model, omega: f64, c: f64, m: i32, kappa: C64) -> C64 {
    model_function(model, omega, c, m, kappa).0
}

fn quadratic_roots(a: C64, b: C64, c: C64) -> [C64; 2] {
    let d = (b * b - 4.0 * a * c).sqrt();
    let q = if (b.conj() * d).re >= 0.0 { -0.5 * (b + d) } else { -0.5 * (b - d) };
    if q.norm() == 0.0 {
        return [C64::new(0.0, 0.0); 2];
    }
    [q / a, c / q]
}

fn cubic_roots(co: [C64; 4]) -> [C64; 3] {
    let [a, b, c, d] = co;
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let u3a = -q / 2.0 + disc;
    let u3b = -q / 2.0 - disc;
    let u3 = if u3a.norm() >= u3b.norm() { u3a } else { u3b };
    let shift = -b / 3.0;
    if u3.norm() == 0.0 {
        return [shift; 3];
    }
    let u = u3.powf(1.0 / 3.0);
    let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut out = [C64::new(0.0, 0.0); 3];
    let mut uk = u;
    for r in out.iter_mut() {
        *r = uk - p / (3.0 * uk) + shift;
        uk *= w;
    }
    out
}

fn newton_polish(model: Model, omega: f64, c: f64, m: i32, mut z: C64) -> C64 {
    for _ in 0..50 {
        let (f, df) = model_function(model, omega, c, m, z);
        if df.norm() == 0.0 {
            break;
        }
        let dz = f / df;
        z -= dz;
        if dz.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Real Newton on the restriction `p -> f(i p)`, which is real for all three models.
fn axis_newton(model: Model, omega: f64, c: f64, m: i32, mut p: f64) -> Option<f64> {
    for _ in 0..60 {
        let (f, df) = model_function(model, omega, c, m, C64::new(0.0, p));
        let g = f.re;
        let dg = (I * df).re;
        if dg == 0.0 || !g.is_finite() {
            return None;
        }
        let dp = g / dg;
        p -= dp;
        if dp.abs() <= 1e-15 * p.abs().max(1.0) {
            break;
        }
    }
    let (f, _) = model_function(model, omega, c, m, C64::new(0.0, p));
    (f.norm() < 1e-11).then_some(p)
}

fn snap_to_axis(model: Model, omega: f64, c: f64, m: i32, z: C64) -> C64 {
    if z.re.abs() > 1e-6 * z.norm().max(1.0) {
        return z;
    }
    match axis_newton(model, omega, c, m, z.im) {
        Some(p) if (p - z.im).abs() < 1e-6 * z.norm().max(1.0) => C64::new(0.0, p),
        _ => z,
    }
}

/// Box searched for lattice roots: `|Re| <= 3`, `|Im| <= 2 pi`.
pub const DISCRETE_BOX: (f64, f64) = (3.0, 2.0 * std::f64::consts::PI);

/// Roots of the characteristic equation of `model`. For the lattice model,
/// all roots in [`DISCRETE_BOX`], with the count confirmed by the argument principle.
pub fn model_dispersion(model: Model, omega: f64, c: f64, m: i32) -> Result<Vec<C64>> {
    if !omega.is_finite() || !c.is_finite() {
        return Err(Error::invalid("omega and c must be finite"));
    }
    let raw: Vec<C64> = match model {
        Model::KleinGordon => {
            let [a, b, d] = kg_coeffs(omega, c, m as f64);
            if a.norm() < 1e-14 {
                return Err(Error::degenerate("c = 1 reduces the Klein-Gordon relation to first order"));
            }
            quadratic_roots(a, b, d).to_vec()
        }
        Model::RegularizedGp => {
            let co = reg_coeffs(omega, c, m as f64);
            if c == 0.0 {
                return Err(Error::degenerate("c = 0 reduces the regularized relation to second order"));
            }
            cubic_roots(co).to_vec()
        }
        Model::DiscreteGp => return discrete_roots(omega, c, m),
    };
    let mut out: Vec<C64> = raw
        .into_iter()
        .map(|z| newton_polish(model, omega, c, m, z))
        .map(|z| snap_to_axis(model, omega, c, m, z))
        .collect();
    out.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
    Ok(out)
}

fn winding_number(omega: f64, c: f64, m: i32) -> Result<i64> {
    let (xr, yi) = DISCRETE_BOX;
    let corners = [C64::new(-xr, -yi), C64::new(xr, -yi), C64::new(xr, yi), C64::new(-xr, yi)];
    let f = |z: C64| model_function(Model::DiscreteGp, omega, c, m, z).0;
    let mut total = 0.0;
    for k in 0..4 {
        let (z0, z1) = (corners[k], corners[(k + 1) % 4]);
        let base = 1024;
        let vals: Vec<C64> = (0..=base).map(|j| f(z0 + (z1 - z0) * (j as f64 / base as f64))).collect();
        let mut stack: Vec<(f64, f64, C64, C64)> = (0..base)
            .rev()
            .map(|j| (j as f64 / base as f64, (j + 1) as f64 / base as f64, vals[j], vals[j + 1]))
            .collect();
        let mut segs = 0usize;
        while let Some((t0, t1, f0, f1)) = stack.pop() {
            if f0.norm() < 1e-13 || f1.norm() < 1e-13 {
                return Err(Error::numerical("root on the search box boundary"));
            }
            let dth = (f1 / f0).arg();
            if dth.abs() < 0.2 || t1 - t0 < 1e-9 {
                total += dth;
                segs += 1;
                continue;
            }
            let tm = 0.5 * (t0 + t1);
            let fm = f(z0 + (z1 - z0) * tm);
            stack.push((tm, t1, fm, f1));
            stack.push((t0, tm, f0, fm));
            if segs > 1 << 22 {
                return Err(Error::numerical("argument principle failed to resolve boundary"));
            }
        }
    }
    let w = total / (2.0 * std::f64::consts::PI);
    if (w - w.round()).abs() > 1e-6 {
        return Err(Error::numerical(format!("non-integer winding {w}")));
    }
    Ok(w.round() as i64)
}

fn discrete_roots(omega: f64, c: f64, m: i32) -> Result<Vec<C64>> {
    let (xr, yi) = DISCRETE_BOX;
    let count = winding_number(omega, c, m)?;
    let inside = |z: C64| z.re.abs() < xr && z.im.abs() < yi;
    let mut found: Vec<C64> = Vec::new();
    let push = |z: C64, found: &mut Vec<C64>| {
        if inside(z) && !found.iter().any(|w| (w - z).norm() < 1e-8) {
            found.push(z);
        }
    };

    // axis roots first, bracketed on the real restriction
    let g = |p: f64| model_function(Model::DiscreteGp, omega, c, m, C64::new(0.0, p)).0.re;
    let nsamp = 4000;
    let mut prev = (-yi, g(-yi));
    for k in 1..=nsamp {
        let p = -yi + 2.0 * yi * k as f64 / nsamp as f64;
        let gp = g(p);
        if prev.1 == 0.0 || prev.1.signum() != gp.signum() {
            let (mut lo, mut hi) = (prev.0, p);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(lo).signum() == g(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let p0 = 0.5 * (lo + hi);
            let p1 = axis_newton(Model::DiscreteGp, omega, c, m, p0).unwrap_or(p0);
            push(C64::new(0.0, p1), &mut found);
        }
        prev = (p, gp);
    }

    for level in 0..4 {
        if found.len() as i64 >= count {
            break;
        }
        let (nx, ny) = (12usize << level, 24usize << level);
        for i in 0..=nx {
            for j in 0..=ny {
                let z0 = C64::new(-xr + 2.0 * xr * i as f64 / nx as f64, -yi + 2.0 * yi * j as f64 / ny as f64);
                let z = newton_polish(Model::DiscreteGp, omega, c, m, z0);
                let f = model_function(Model::DiscreteGp, omega, c, m, z).0;
                if f.norm() < 1e-11 {
                    push(snap_to_axis(Model::DiscreteGp, omega, c, m, z), &mut found);
                }
            }
        }
    }
    if found.len() as i64 != count {
        return Err(Error::numerical(format!(
            "found {} lattice roots but the argument principle counts {count}",
            found.len()
        )));
    }
    found.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_mode_roots() {
        let (kp, km) = roots(1, 0.5, 1).unwrap();
        assert!(kp.norm() < 1e-15);
        assert!((km - C64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn hyperbolic_mode_roots() {
        let (kp, km) = roots(1, 0.5, 3).unwrap();
        let r = 1.75f64.sqrt() / 2.0;
        assert!((kp - C64::new(r, -1.25)).norm() < 1e-15);
        assert!((km - C64::new(-r, -1.25)).norm() < 1e-15);
    }

    #[test]
    fn parity_and_range_errors() {
        assert!(roots(1, 0.5, 2).is_err());
        assert!(roots(1, 0.0, 1).is_err());
        assert!(roots(1, 1.0, 1).is_err());
    }

    #[test]
    fn classification_threshold() {
        let atlas = root_atlas(1, 0.5, (-5, 5)).unwrap();
        assert_eq!(atlas.m0, 1);
        for e in &atlas.entries {
            if e.m <= 1 {
                assert_eq!((e.class_plus, e.class_minus), (RootClass::CenterPlus, RootClass::CenterMinus));
            } else {
                assert_eq!((e.class_plus, e.class_minus), (RootClass::Unstable, RootClass::Stable));
            }
        }
    }

    #[test]
    fn cubic_solver_matches_vieta() {
        let co = reg_coeffs(0.4, 0.3, 3.0);
        let r = cubic_roots(co);
        let sum = r[0] + r[1] + r[2];
        let prod = r[0] * r[1] * r[2];
        assert!((sum + co[1] / co[0]).norm() < 1e-12);
        assert!((prod + co[3] / co[0]).norm() < 1e-12);
    }

    #[test]
    fn axis_restriction_is_real() {
        for model in [Model::KleinGordon, Model::RegularizedGp, Model::DiscreteGp] {
            for p in [-2.0, -0.3, 0.7, 3.1] {
                let f = model_residual(model, 0.4, 0.3, 5, C64::new(0.0, p));
                assert!(f.im.abs() < 1e-12 * f.norm().max(1.0), "{model:?}");
            }
        }
    }
}
