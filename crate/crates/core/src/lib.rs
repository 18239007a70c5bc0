//! Gap solitons in periodic Gross-Pitaevskii media: coupled-mode reductions,
//! spatial-dynamics formulation, dispersion atlases and split-step checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cme;
pub mod error;
pub mod gpsim;
pub mod hamiltonian;
pub mod io;
pub mod modes;
pub mod ode;
pub mod potential;
pub mod quad;
pub mod spatial;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
