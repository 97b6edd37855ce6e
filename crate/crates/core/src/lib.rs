//! Radar height estimation on synthetic scenes.
//!
//! Radar points carry no usable elevation, so projecting them onto the camera
//! image yields single pixels. This crate builds per-pixel height targets from
//! 3D boxes, trains a small camera+radar network with a family of robust
//! regression losses, and uses its predictions to extend each radar point into
//! a vertical line of the right length. Evaluation covers height errors at
//! radar pixels and standard depth-estimation metrics.

pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod ground_truth;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod radar;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
