//! Boundary-localized energy budgets for wall-bounded incompressible flow.
//!
//! The crate couples a 2D channel Navier–Stokes solver with the diagnostics
//! used to study energy conservation and the inviscid limit near solid walls:
//! mollified and wall-cutoff energy balances, Besov-type increment norms,
//! Kato-layer dissipation and relative-energy bounds.

pub mod besov;
pub mod budget;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod limits;
pub mod mollify;
pub mod report;
pub mod snapshot;
pub mod solver;

pub use error::{Error, ErrorClass, Result};
pub use fields::{
    region_norm, time_norm, Grid2, Offset, Region, Restricted, ScalarField2, TensorField2,
    VectorField2,
};
pub use geometry::{ChannelDomain, Side, Wall};
pub use mollify::{CutoffProfile, MollifierKernel};
pub use snapshot::Snapshot;
