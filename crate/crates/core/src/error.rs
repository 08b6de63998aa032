use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix order {order} exceeds the limit of {limit}")]
    SizeLimit { order: usize, limit: usize },

    #[error("photon configuration error: {0}")]
    Configuration(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("undefined visibility: {0}")]
    UndefinedVisibility(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Element labels are 1-based (output, input).
    #[error(
        "indeterminate phase for element ({output}, {input}): zero amplitude in its 2x2 block"
    )]
    IndeterminatePhase { output: usize, input: usize },

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    /// Keys are 1-based (i, j, l, m).
    #[error("missing visibility records for (i,j,l,m): {}", format_keys(.0))]
    MissingRecords(Vec<(usize, usize, usize, usize)>),

    #[error("record pairing error: {0}")]
    Pairing(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("resampling unstable: {failed} of {total} resamples failed")]
    Unstable { failed: usize, total: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input
    /// shape or file contents.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UndefinedVisibility(_)
                | Error::DegenerateInput(_)
                | Error::IndeterminatePhase { .. }
                | Error::InconsistentData(_)
                | Error::DegenerateFit(_)
                | Error::Unstable { .. }
        )
    }
}

fn format_keys(keys: &[(usize, usize, usize, usize)]) -> String {
    keys.iter()
        .map(|(i, j, l, m)| format!("({i},{j},{l},{m})"))
        .collect::<Vec<_>>()
        .join(", ")
}
