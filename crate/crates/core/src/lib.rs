//! Self-organizing-map intrusion detection with built-in explainability.
//!
//! The pipeline runs in three phases: [`ingest`] turns raw network-flow CSVs
//! into normalized feature matrices, [`som`] trains a 2D map on them, and the
//! trained map is then labeled ([`classify`]), measured ([`quality`]), and
//! data-mined into explanation artifacts ([`explain`]) that [`render`] emits
//! as SVG. [`persist`] holds the on-disk JSON document formats shared by the
//! CLI and tests.

pub mod classify;
pub mod error;
pub mod explain;
pub mod ingest;
pub mod persist;
pub mod quality;
pub mod render;
pub mod som;
pub mod synth;

pub use error::{Error, Result};
