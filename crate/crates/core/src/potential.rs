//! Real, even, zero-mean periodic potentials `W(x) = sum_m w_{2m} e^{i m x}`.
//!
//! Coefficients are stored by harmonic `m >= 1`; the negative harmonics are
//! implied by symmetry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Fourier entry of the JSON form: the coefficient `w` of `e^{i m x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub m: i32,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PotentialJson {
    coeffs: Vec<Coefficient>,
    #[serde(default = "default_s")]
    s: f64,
}

fn default_s() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    coeffs: BTreeMap<i32, f64>,
    s: f64,
}

impl PotentialSpec {
    /// `W(x) = 2 cos x`, the single-harmonic default.
    pub fn cosine() -> Self {
        build_potential(&[(1, 1.0)], 1.0).expect("default potential is valid")
    }

    pub fn sobolev_index(&self) -> f64 {
        self.s
    }

    /// Coefficient of `e^{i k x}` (the `w_{2k}` of the series).
    pub fn harmonic(&self, k: i32) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(&k.abs()).copied().unwrap_or(0.0)
    }

    /// Coefficient with the half-wavenumber subscript used by the mode equations:
    /// `w_j` multiplies `e^{i j x / 2}` and vanishes for odd `j`.
    pub fn w_sub(&self, j: i32) -> f64 {
        if j % 2 != 0 {
            0.0
        } else {
            self.harmonic(j / 2)
        }
    }

    /// Highest harmonic with a non-zero coefficient.
    pub fn support(&self) -> i32 {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    pub fn positive_harmonics(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.coeffs.iter().map(|(&m, &w)| (m, w))
    }

    /// `sum_m (1 + m^2)^s |w_{2m}|^2` over all harmonics of both signs.
    pub fn sobolev_norm_sq(&self) -> f64 {
        2.0 * self.coeffs.iter().map(|(&m, &w)| (1.0 + (m as f64).powi(2)).powf(self.s) * w * w).sum::<f64>()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        evaluate_w(self, x)
    }

    pub fn to_json(&self) -> String {
        let j = PotentialJson { coeffs: self.coeffs.iter().map(|(&m, &w)| Coefficient { m, w }).collect(), s: self.s };
        serde_json::to_string_pretty(&j).expect("potential serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: PotentialJson =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("potential JSON: {e}")))?;
        let pairs: Vec<(i32, f64)> = j.coeffs.iter().map(|c| (c.m, c.w)).collect();
        build_potential(&pairs, j.s)
    }
}

/// Builds a potential from `(m, w_{2m})` pairs. Negative harmonics are accepted
/// when they agree with their positive partner; the mean `w_0` must vanish.
pub fn build_potential(pairs: &[(i32, f64)], s: f64) -> Result<PotentialSpec> {
    if !(s > 0.5) || !s.is_finite() {
        return Err(Error::invalid(format!("Sobolev index s must be finite and exceed 1/2, got {s}")));
    }
    let mut seen: BTreeMap<i32, f64> = BTreeMap::new();
    for &(m, w) in pairs {
        if !w.is_finite() {
            return Err(Error::invalid(format!("coefficient for m = {m} is not finite")));
        }
        if seen.insert(m, w).is_some() {
            return Err(Error::invalid(format!("harmonic m = {m} listed twice")));
        }
    }
    if let Some(&w0) = seen.get(&0) {
        if w0 != 0.0 {
            return Err(Error::invalid(format!("mean term w_0 = {w0} must vanish")));
        }
    }
    let mut coeffs = BTreeMap::new();
    for (&m, &w) in &seen {
        if m == 0 {
            continue;
        }
        if let Some(&partner) = seen.get(&-m) {
            if partner != w {
                return Err(Error::invalid(format!("asymmetric coefficients: w({m}) = {w} but w({}) = {partner}", -m)));
            }
        }
        if w != 0.0 {
            coeffs.insert(m.abs(), w);
        }
    }
    Ok(PotentialSpec { coeffs, s })
}

pub fn evaluate_w(spec: &PotentialSpec, x: f64) -> f64 {
    spec.coeffs.iter().map(|(&m, &w)| 2.0 * w * (m as f64 * x).cos()).sum()
}
