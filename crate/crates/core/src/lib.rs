//! HVAC load disaggregation from 15-minute smart-meter data.
//!
//! The workflow per household:
//!
//! 1. [`ingest`] meter and weather CSVs into day-column matrices.
//! 2. [`preprocess`]: label days hot/mild, strip large infrequent loads and
//!    build, for each hot day, the ensemble of hot-minus-mild residuals.
//! 3. [`ica`]: whiten the ensemble, separate two components with FastICA and
//!    pick the temperature-linked one as the HVAC estimate.
//! 4. [`finetune`]: adjust the HVAC and base estimates under hourly
//!    temperature-derived energy bounds, box constraints and a base-load
//!    distribution term.
//! 5. [`eval`]: score against sub-metered truth and the mild-day average
//!    benchmark.
//!
//! [`synth`] generates households with known HVAC and base loads so every
//! stage can be checked, and [`commands`] wires the stages into run
//! directories for the `hvac-disagg` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod ica;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};

/// Length of one meter interval.
pub const SLOT_MINUTES: usize = 15;
/// Meter intervals per day (N).
pub const SLOTS_PER_DAY: usize = 96;
pub const HOURS_PER_DAY: usize = 24;
/// Meter intervals per hour.
pub const SLOTS_PER_HOUR: usize = 4;
