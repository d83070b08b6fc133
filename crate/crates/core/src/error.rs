use chrono::{NaiveDate, NaiveDateTime};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("rejected {} row(s): {}", .0.len(), format_rows(.0))]
    Rows(Vec<RowError>),

    #[error("empty series")]
    EmptySeries,

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDateTime),

    #[error("interval of {0} minutes must be a positive whole number of minutes dividing 24 h")]
    InvalidInterval(i64),

    #[error("timestamp {0} is not on the 15-minute grid")]
    OffGrid(NaiveDateTime),

    #[error("no usable days: all {dropped} day(s) exceeded the missing-bin threshold")]
    NoUsableDays { dropped: usize },

    #[error("temperature series does not cover {0}")]
    UncoveredDate(NaiveDate),

    #[error("{date}: {missing} hourly temperature readings missing (limit 6)")]
    TooManyMissingHours { date: NaiveDate, missing: usize },

    #[error("temperature {value} °C at {at} outside [-40, 60]")]
    TemperatureOutOfRange { at: NaiveDateTime, value: f64 },

    #[error("day matrices are misaligned: {0}")]
    Misaligned(String),

    #[error("only {found} mild day(s) survived classification, {required} required; widen the mild temperature band or relax max_ks")]
    InsufficientMildDays { found: usize, required: usize },

    #[error("residual ensemble needs at least 3 mild days, got {0}")]
    InsufficientEnsemble(usize),

    #[error("insufficient ensemble rank")]
    InsufficientRank,

    #[error("covariance is not symmetric positive definite")]
    NotSpd,

    #[error("base statistics need at least 3 days, got {0}")]
    InsufficientDays(usize),

    #[error("fine-tuning diverged at iteration {iteration}: objective is not finite")]
    Divergence { iteration: usize },

    #[error("rating must be positive, got {0}")]
    InvalidRating(f64),

    #[error("ground-truth energy is zero")]
    ZeroTruthEnergy,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no hot days")]
    NoHotDays,

    #[error("no mild days")]
    NoMildDays,

    #[error("missing ground truth for customer `{0}`")]
    MissingTruth(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("customer `{id}`: {source}")]
    Customer {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by the configuration rather than the data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidInterval(_) => true,
            Error::Customer { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub fn for_customer(self, id: &str) -> Self {
        match self {
            e @ Error::Customer { .. } => e,
            e => Error::Customer {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }
}

/// A rejected CSV row. `row` is 1-based and counts the header as row 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub row: usize,
    pub message: String,
}

fn format_rows(rows: &[RowError]) -> String {
    const SHOWN: usize = 5;
    let mut s = rows
        .iter()
        .take(SHOWN)
        .map(|r| format!("row {}: {}", r.row, r.message))
        .collect::<Vec<_>>()
        .join("; ");
    if rows.len() > SHOWN {
        s.push_str(&format!("; and {} more", rows.len() - SHOWN));
    }
    s
}
