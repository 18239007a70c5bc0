//! C ABI over the gapsol core. Every entry point returns a [`GapsolStatus`];
//! results are written through out-pointers and objects are opaque handles
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gapsol::cme::{ode_residual, CmeParams, Soliton};
use gapsol::spectral::{model_dispersion, model_residual, root_atlas, Model, RootAtlas};
use gapsol::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapsolStatus {
    Ok = 0,
    NullPointer = -1,
    Invalid = -2,
    Degenerate = -3,
    Numerical = -4,
    Panic = -5,
    Capacity = -6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapsolDispersionModel {
    KleinGordon = 0,
    RegularizedGp = 1,
    DiscreteGp = 2,
}

/// Envelopes `a`, `b` of the soliton at one point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GapsolProfile {
    pub re_a: f64,
    pub im_a: f64,
    pub re_b: f64,
    pub im_b: f64,
    /// Modulus of the coupled-mode residual at this point.
    pub residual: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GapsolRootEntry {
    pub m: i32,
    pub re_kappa_plus: f64,
    pub im_kappa_plus: f64,
    pub re_kappa_minus: f64,
    pub im_kappa_minus: f64,
}

/// Opaque closed-form soliton.
pub struct GapsolSoliton {
    params: CmeParams,
    sol: Soliton,
}

/// Opaque root atlas.
pub struct GapsolAtlas {
    atlas: RootAtlas,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GapsolStatus {
    match err {
        Error::Invalid(_) | Error::Json(_) => GapsolStatus::Invalid,
        Error::Degenerate(_) => GapsolStatus::Degenerate,
        Error::Integration { .. } | Error::Numerical(_) | Error::Io(_) => GapsolStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> Result<(), GapsolStatus>>(f: F) -> GapsolStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GapsolStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside gapsol".into());
            GapsolStatus::Panic
        }
    }
}

fn lift<T>(r: gapsol::Result<T>) -> Result<T, GapsolStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn nonnull<T>(p: *const T) -> Result<(), GapsolStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        Err(GapsolStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, or null. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gapsol_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn gapsol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the soliton for `(n, c, omega, sigma, w2n)`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_soliton_new(
    n: i32,
    c: f64,
    omega: f64,
    sigma: i32,
    w2n: f64,
    out: *mut *mut GapsolSoliton,
) -> GapsolStatus {
    guard(|| {
        nonnull(out)?;
        let params = lift(CmeParams::new(n, c, omega, sigma, w2n))?;
        let sol = lift(Soliton::new(&params))?;
        *out = Box::into_raw(Box::new(GapsolSoliton { params, sol }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`gapsol_soliton_new`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gapsol_soliton_free(h: *mut GapsolSoliton) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Decay rate of the envelopes in the slow co-moving variable.
///
/// # Safety
/// `h` must be a live soliton handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_soliton_decay_rate(h: *const GapsolSoliton, out: *mut f64) -> GapsolStatus {
    guard(|| {
        nonnull(h)?;
        nonnull(out)?;
        *out = (*h).params.decay_rate_y();
        Ok(())
    })
}

/// Envelopes and residual at slow coordinate `y`.
///
/// # Safety
/// `h` must be a live soliton handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_soliton_profile(
    h: *const GapsolSoliton,
    y: f64,
    out: *mut GapsolProfile,
) -> GapsolStatus {
    guard(|| {
        nonnull(h)?;
        nonnull(out)?;
        let h = &*h;
        let pt = lift(h.sol.profile(y))?;
        let r = ode_residual(&h.params, &pt);
        *out = GapsolProfile {
            re_a: pt.a.re,
            im_a: pt.a.im,
            re_b: pt.b.re,
            im_b: pt.b.im,
            residual: r[0].norm().max(r[1].norm()),
        };
        Ok(())
    })
}

/// Spatial roots for the modes of the parity of `n` in `[m_min, m_max]`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_atlas_new(
    n: i32,
    c: f64,
    m_min: i32,
    m_max: i32,
    out: *mut *mut GapsolAtlas,
) -> GapsolStatus {
    guard(|| {
        nonnull(out)?;
        let atlas = lift(root_atlas(n, c, (m_min, m_max)))?;
        *out = Box::into_raw(Box::new(GapsolAtlas { atlas }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`gapsol_atlas_new`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gapsol_atlas_free(h: *mut GapsolAtlas) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live atlas handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_atlas_len(h: *const GapsolAtlas, out: *mut usize) -> GapsolStatus {
    guard(|| {
        nonnull(h)?;
        nonnull(out)?;
        *out = (*h).atlas.entries.len();
        Ok(())
    })
}

/// # Safety
/// `h` must be a live atlas handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_atlas_entry(
    h: *const GapsolAtlas,
    index: usize,
    out: *mut GapsolRootEntry,
) -> GapsolStatus {
    guard(|| {
        nonnull(h)?;
        nonnull(out)?;
        let entries = &(*h).atlas.entries;
        let e = entries.get(index).ok_or_else(|| {
            set_error(format!("index {index} out of range for {} entries", entries.len()));
            GapsolStatus::Invalid
        })?;
        *out = GapsolRootEntry {
            m: e.m,
            re_kappa_plus: e.kappa_plus.re,
            im_kappa_plus: e.kappa_plus.im,
            re_kappa_minus: e.kappa_minus.re,
            im_kappa_minus: e.kappa_minus.im,
        };
        Ok(())
    })
}

/// Roots of a model dispersion relation for mode `m`. Writes up to `capacity`
/// roots into `re`/`im` and the total count into `len`; returns `Capacity`
/// when the buffers are too short.
///
/// # Safety
/// `re` and `im` must be valid for `capacity` writes and `len` for one.
#[no_mangle]
pub unsafe extern "C" fn gapsol_dispersion_roots(
    model: GapsolDispersionModel,
    omega: f64,
    c: f64,
    m: i32,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> GapsolStatus {
    guard(|| {
        nonnull(len)?;
        let ks = lift(model_dispersion(core_model(model), omega, c, m))?;
        *len = ks.len();
        if ks.len() > capacity {
            set_error(format!("{} roots, buffer holds {capacity}", ks.len()));
            return Err(GapsolStatus::Capacity);
        }
        if !ks.is_empty() {
            nonnull(re)?;
            nonnull(im)?;
        }
        for (i, k) in ks.iter().enumerate() {
            *re.add(i) = k.re;
            *im.add(i) = k.im;
        }
        Ok(())
    })
}

/// Modulus of the characteristic function at `kappa`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn gapsol_dispersion_residual(
    model: GapsolDispersionModel,
    omega: f64,
    c: f64,
    m: i32,
    re: f64,
    im: f64,
    out: *mut f64,
) -> GapsolStatus {
    guard(|| {
        nonnull(out)?;
        *out = model_residual(core_model(model), omega, c, m, gapsol::C64::new(re, im)).norm();
        Ok(())
    })
}

fn core_model(m: GapsolDispersionModel) -> Model {
    match m {
        GapsolDispersionModel::KleinGordon => Model::KleinGordon,
        GapsolDispersionModel::RegularizedGp => Model::RegularizedGp,
        GapsolDispersionModel::DiscreteGp => Model::DiscreteGp,
    }
}
