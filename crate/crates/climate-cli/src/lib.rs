//! Gridded two-period trend analysis with excursion-set confidence regions:
//! file formats, the two-period design, the analysis pipeline, a synthetic
//! surrogate generator and SVG rendering.

pub mod analysis;
pub mod design;
pub mod error;
pub mod render;
pub mod selftest;
pub mod stackfile;
pub mod surrogate;

pub use error::{CliError, Result};
