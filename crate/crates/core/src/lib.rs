//! Spectral simulation of interacting bosons in the mean-field regime.
//!
//! The crate solves the one-body Hartree and cubic Schrödinger equations with
//! an external potential by Strang splitting on a periodic box, propagates
//! small `N`-body states exactly, extracts reduced one-particle density
//! matrices, and provides the analysis tools (rate fits, Grönwall bounds,
//! decay measurements) used to compare the two descriptions.
//!
//! ```
//! use meanfield::grid::{make_grid, norm, Field, Norm};
//!
//! let grid = make_grid(1, 256, 32.0).unwrap();
//! let u = Field::from_real_fn(&grid, |x| (-x[0] * x[0]).exp()).normalized().unwrap();
//! assert!((norm(&u, Norm::L2) - 1.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod manybody;
pub mod onebody;
pub mod potentials;

pub use error::{Error, Result};
pub use grid::{make_grid, Field, Grid, Norm, Spectrum};
