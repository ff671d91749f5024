use std::path::PathBuf;

use thiserror::Error;

/// Which bandwidth simplex a constraint refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Simplex {
    /// Dataset offloading shares (ω̃).
    Offload,
    /// Weight upload shares (ω̄).
    Upload,
}

impl std::fmt::Display for Simplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Simplex::Offload => f.write_str("offload"),
            Simplex::Upload => f.write_str("upload"),
        }
    }
}

/// Per-user allocation field, used to point at the offending entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocField {
    Delta,
    Gamma,
    UplinkOffload,
    UplinkWeight,
    LambdaOffload,
    LambdaLocal,
}

impl std::fmt::Display for AllocField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AllocField::Delta => "delta",
            AllocField::Gamma => "gamma",
            AllocField::UplinkOffload => "uplink_offload",
            AllocField::UplinkWeight => "uplink_weight",
            AllocField::LambdaOffload => "lambda_offload",
            AllocField::LambdaLocal => "lambda_local",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("{simplex} bandwidth shares sum to 1 + {excess:.3e}")]
    SumExceedsOne { simplex: Simplex, excess: f64 },

    #[error("user {index}: {field} out of range")]
    OutOfRange { index: usize, field: AllocField },

    #[error("allocation vectors have length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("user {user}: zero divisor in {term}")]
    DegenerateDivisor { user: usize, term: &'static str },

    #[error("every proportionality weight of the {0} simplex is zero")]
    AllZeroWeights(Simplex),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("aggregation sizes are inconsistent: {0}")]
    InconsistentSizes(String),

    #[error("no grid point satisfies the constraint")]
    NoFeasiblePoint,

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("exhaustive search supports at most 3 users, got {0}")]
    InstanceTooLarge(usize),

    #[error("{path}: bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: truncated at byte offset {offset}")]
    TruncatedFile { path: PathBuf, offset: usize },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Strips iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Iteration { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
