//! Interactive object selection from clicks.
//!
//! Clicks become truncated distance maps ([`encoding`]), a pluggable
//! [`backend`] turns image plus maps into a per-pixel object probability, and
//! [`graphcut`] refines that probability into a mask under hard click
//! constraints. [`sampling`] synthesizes training clicks, [`simulator`]
//! measures how many clicks a pipeline needs, and [`dataset`] reads and writes
//! the on-disk scene layout; [`pairs`] does the same for sampled training
//! pairs.

pub mod backend;
pub mod dataset;
pub mod edt;
pub mod encoding;
pub mod error;
pub mod graphcut;
pub mod pairs;
pub mod raster;
pub mod sampling;
pub mod simulator;

pub use error::{Error, Result};
pub use raster::{iou, BinaryMask, Image, Pixel, ProbabilityMap};
