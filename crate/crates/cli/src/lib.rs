//! Experiment harness around `gridmask-core`: configuration, the five
//! commands, table output and report rendering.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;

pub use config::{ExperimentConfig, Study, NE39_PMU_BUSES, NE39_STUDY_LINES};

/// Exit status when a sweep finished but some rows failed.
pub const EXIT_PARTIAL: u8 = 3;
