//! Confidence regions for excursion sets of gridded fields.
//!
//! Given repeated noisy observations of a target surface on a fixed grid,
//! this crate fits a linear model at every cell, calibrates a threshold `a`
//! by a Gaussian multiplier bootstrap of the supremum of the limiting field
//! on the plug-in excursion boundary, and thresholds the standardized
//! deviation surface at -a, 0, +a. The resulting nested masks bracket the
//! true excursion set with prescribed asymptotic probability.
//!
//! Module map:
//! - [`grid`]: lattice geometry, scalar fields, region masks
//! - [`contour`]: interpolated boundary points and marching-squares polylines
//! - [`glm`]: per-cell least squares and the standardized deviation field
//! - [`bootstrap`]: multiplier bootstrap sup distribution and thresholds
//! - [`cope`]: nested-mask assembly and the end-to-end pipeline
//! - [`simlab`]: synthetic signal/noise generators and coverage experiments
//! - [`smooth`]: kernel smoothing used by the noise generators

pub mod bootstrap;
pub mod contour;
pub mod cope;
pub mod error;
pub mod glm;
pub mod grid;
mod linalg;
pub mod rng;
pub mod simlab;
pub mod smooth;

pub use error::{Error, Result};
