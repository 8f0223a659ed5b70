//! Scattering, determinant and spectral tools for the derivative NLS.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // !(x > 0.0) also rejects NaN

pub mod acceptance;
pub mod backlund;
pub mod error;
pub mod evolve;
pub mod field;
pub mod fredholm;
pub mod jost;
pub mod linalg;
pub mod par;
pub mod soliton;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use field::{ConservedSet, Field, GnKind, Grid, Snapshot};
pub use jost::{JostConfig, SpectralPoint};
pub use par::Exec;
pub use soliton::SolitonParams;
