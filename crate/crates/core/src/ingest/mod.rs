//! Meter and weather CSV ingestion and per-day matrix assembly.

mod matrix;
mod series;

pub use matrix::{
    build_day_matrix, build_temperature_matrix, DailyLoadMatrix, DroppedDay, TemperatureMatrix,
};
pub use series::{
    load_power_csv, load_temperature_csv, load_truth_csv, parse_timestamp, read_series,
    resample_mean, DuplicatePolicy, SeriesKind, TimeSeries, TIMESTAMP_OUT,
};
