//! Error type shared across the crate.

/// Errors produced by data loading, fitting, estimation and the oracle.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric value at data row {row}, column `{column}`")]
    NonNumericValue { row: usize, column: String },
    #[error("empty input file")]
    EmptyFile,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fold labels not assigned; call assign_folds first")]
    FoldsUnassigned,
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("empty lambda grid")]
    GridEmpty,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no estimable cells (every cell has an empty fold)")]
    NoEstimableCells,
    #[error("missing nuisance fit `{0}`")]
    MissingNuisance(&'static str),
    #[error("unreachable support point {0}: zero marginal mass")]
    UnreachableSupportPoint(usize),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("first-stage coefficient pi must be nonzero")]
    ZeroPi,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code class: 2 for configuration/input errors, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingColumn(_)
            | Error::NonNumericValue { .. }
            | Error::EmptyFile
            | Error::GridEmpty
            | Error::InvalidConfig(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }

    /// Stable machine-readable tag used in the CLI's JSON error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumericValue { .. } => "non_numeric_value",
            Error::EmptyFile => "empty_file",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::FoldsUnassigned => "folds_unassigned",
            Error::SingularSystem(_) => "singular_system",
            Error::GridEmpty => "grid_empty",
            Error::InsufficientData(_) => "insufficient_data",
            Error::NoEstimableCells => "no_estimable_cells",
            Error::MissingNuisance(_) => "missing_nuisance",
            Error::UnreachableSupportPoint(_) => "unreachable_support_point",
            Error::ModelMismatch(_) => "model_mismatch",
            Error::SupportMismatch(_) => "support_mismatch",
            Error::ZeroPi => "zero_pi",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
