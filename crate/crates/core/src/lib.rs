//! Absolute accuracy evaluation of RTK-SLAM trajectories against surveyed
//! checkpoints, alongside the usual SE(3)-aligned error.
//!
//! Typical flow: parse inputs ([`trajectory_io`]), move IMU poses to the
//! device base center ([`lever_arm`]), find checkpoint visits ([`matching`]),
//! compare in UTM ([`metrics`]) and relate errors to RTK coverage
//! ([`drift`]). [`pipeline`] wires these together for a run configuration
//! and [`report`] writes the artifacts. [`synth`] builds scenarios with known
//! answers.

pub mod alignment;
pub mod config;
pub mod drift;
pub mod geodesy;
pub mod lever_arm;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod synth;
pub mod trajectory_io;
