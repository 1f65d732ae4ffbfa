//! Curation pipeline for activities-of-daily-living video instruction data
//! and the matching evaluation harness.

pub mod annotate;
pub mod backends;
pub mod config;
pub mod error;
pub mod eval;
pub mod media;
pub mod model;
pub mod objects;
pub mod pipeline;
pub mod pose;
pub mod video;

pub use error::{Error, Result};
