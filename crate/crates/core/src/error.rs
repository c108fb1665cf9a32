use thiserror::Error;

/// Errors produced by the design computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("link `{0}` is not supported by this operation (logit only)")]
    UnsupportedLink(&'static str),

    /// Two or more zero weights make the criterion vanish for every design.
    #[error("criterion is identically zero: {zeros} of the weights are zero")]
    DegenerateCriterion { zeros: usize },

    #[error("certification failed at draw {draw} (seed {seed}): {reason}")]
    Certification {
        draw: u64,
        seed: u64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("per-draw records were not retained")]
    RecordsNotRetained,

    #[error("export failed: {0}")]
    Export(String),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::InvalidDesign(_) => "invalid_design",
            Error::Precondition(_) => "precondition",
            Error::UnsupportedLink(_) => "unsupported_link",
            Error::DegenerateCriterion { .. } => "degenerate_criterion",
            Error::Certification { .. } => "certification",
            Error::InvalidConfig(_) => "invalid_config",
            Error::RecordsNotRetained => "records_not_retained",
            Error::Export(_) => "export",
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Certification { .. } | Error::Export(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
