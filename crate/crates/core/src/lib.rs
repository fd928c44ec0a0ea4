//! Mean-field dynamics of the quenched BCS pseudospin model.
//!
//! Two routes to the dynamical phase diagram live side by side: root analysis
//! of the squared Lax norm ([`lax`]) and direct integration of the Bloch
//! equations ([`dynamics`]), with post-processing in [`observables`]. The
//! [`cavity`] module adds inhomogeneous atom-light coupling, decay and the
//! intracavity-field readout; [`sweep`] runs parameter grids.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod dynamics;
pub mod error;
pub mod lax;
pub mod model;
pub mod observables;
pub mod selftest;
pub mod special;
pub mod sweep;

pub use error::{Error, Result};
