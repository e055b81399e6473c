use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced anywhere in the ice-jam modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{station}: no coincident target/donor days in calendar month {month}")]
    NoCoincidentDays { station: String, month: u32 },

    #[error("{what}: missing values on {} date(s): {}", dates.len(), format_dates(dates))]
    MissingData { what: String, dates: Vec<NaiveDate> },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("zero variance in baseline")]
    ZeroVariance,

    #[error("baseline mean is zero; percent-of-average is undefined")]
    ZeroMean,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid design matrix: {0}")]
    InvalidDesign(String),

    #[error("collinear design columns: {}", columns.join(", "))]
    Collinear { columns: Vec<String> },

    #[error("AICc undefined: n = {n} must exceed k + 1 = {}", k + 1)]
    AiccUndefined { n: usize, k: usize },

    #[error("need at least {needed} converged bootstrap replicates, have {have}")]
    TooFewReplicates { needed: usize, have: usize },

    #[error("invalid probability {0}: must lie strictly inside (0, 1)")]
    InvalidProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scaling mismatch: model uses {model}, forcing uses {forcing}")]
    ScalingMismatch { model: String, forcing: String },

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("forcing `{forcing}` has no column `{covariate}`")]
    MissingCovariate { forcing: String, covariate: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }

    /// Short machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NoCoincidentDays { .. } => "no_coincident_days",
            Error::MissingData { .. } => "missing_data",
            Error::InvalidWindow(_) => "invalid_window",
            Error::ZeroVariance => "zero_variance",
            Error::ZeroMean => "zero_mean",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidDesign(_) => "invalid_design",
            Error::Collinear { .. } => "collinear",
            Error::AiccUndefined { .. } => "aicc_undefined",
            Error::TooFewReplicates { .. } => "too_few_replicates",
            Error::InvalidProbability(_) => "invalid_probability",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ScalingMismatch { .. } => "scaling_mismatch",
            Error::UnknownCovariate(_) => "unknown_covariate",
            Error::MissingCovariate { .. } => "missing_covariate",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Stage { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

fn format_dates(dates: &[NaiveDate]) -> String {
    const SHOWN: usize = 10;
    let mut s = dates
        .iter()
        .take(SHOWN)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if dates.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", dates.len() - SHOWN));
    }
    s
}
