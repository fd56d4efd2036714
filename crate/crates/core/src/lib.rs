#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Ensemble correlation-filter tracking with feature-aware experts and
//! fitness-driven roulette selection of the experts that run each frame.

pub mod config;
pub mod dcf;
pub mod error;
pub mod evaluation;
pub mod experts;
pub mod features;
pub mod geometry;
pub mod ingestion;
pub mod metrics;
pub mod report;
pub mod selection;
pub mod tracker;

pub use config::{FeatureSourceSpec, Mode, RunConfig};
pub use error::{Error, Result};
pub use geometry::BoundingBox;
pub use tracker::{run_tracker, RunRecord, Tracker};
