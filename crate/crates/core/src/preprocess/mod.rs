//! Day labelling, large-infrequent-load removal and residual ensembles.

mod classify;
mod ks;
mod liul;
mod residual;

pub use classify::{
    classify_days, read_labels_csv, write_labels_csv, ClassifyParams, DayLabel, Label,
    REASON_BAND, REASON_HOT, REASON_MATCH, REASON_MILD, REASON_MISMATCH,
};
pub use ks::{ks_statistic, verify_mild_distribution};
pub use liul::{filter_liul, filter_liul_days, jump_frequency, LiulEvent, LiulParams, Pulse};
pub use residual::{build_residual_ensemble, nearest_mild_days, ResidualEnsemble, MIN_ENSEMBLE};
