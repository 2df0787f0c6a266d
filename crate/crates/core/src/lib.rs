//! Benchmark model and deterministic simulator for cyclic real-time control
//! tasks under network flooding and CPU stress, plus the analysis pipeline
//! that turns cycle series into per-phase statistics and result matrices.

pub mod analysis;
pub mod config;
pub mod model;
pub mod series;
pub mod sim;
