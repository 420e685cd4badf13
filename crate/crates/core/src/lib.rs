//! Driven-dissipative quantum Rabi model in the dressed-state picture.
//!
//! The pipeline for one parameter point is
//! [`spectrum`] -> [`dissipator`] -> [`dynamics`] -> [`observables`];
//! [`sweep`] runs it over grids and cuts, in parallel when the `parallel`
//! feature is enabled.

// Negated comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dissipator;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod observables;
pub mod output;
pub mod params;
pub mod spectrum;
pub mod sweep;

pub use error::{RabiError, Result};
pub use params::{FockTruncation, RabiParams};
