use thiserror::Error;

/// Errors surfaced by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("composition singular: (S_CC * S_TLN_CC - I) is ill-conditioned{}",
        .config_id.as_deref().map(|c| format!(" for configuration {c}")).unwrap_or_default())]
    CompositionSingular { config_id: Option<String> },

    #[error("resonant cascade: (I - S_SS * S_DUT) is singular or ill-conditioned")]
    ResonantCascade,

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("enumeration cap exceeded: {count} configurations exceed cap {cap}")]
    EnumerationCapExceeded { count: u128, cap: u128 },

    #[error("degenerate campaign: no DUT signature in any measurement")]
    DegenerateCampaign,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported schema version {found} (supported: {supported})")]
    SchemaVersion { found: u64, supported: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("configuration error at index {index}: {source}")]
    AtConfiguration {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
