use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid optical path: {0}")]
    InvalidPath(String),

    #[error("no spectral filter between noise source and detector passes {frequency_thz} THz")]
    NoCollectionFilter { frequency_thz: f64 },

    #[error("unknown ONU id {0}")]
    UnknownOnu(u32),

    #[error("entropy argument {0} outside [0, 1]")]
    EntropyDomain(f64),

    #[error("decoy-state bound infeasible (single-photon yield bound {y1_lower:.3e} <= 0)")]
    DecoyInfeasible { y1_lower: f64 },

    #[error("assignment infeasible: {0}")]
    Infeasible(#[from] crate::cwas::Infeasibility),

    #[error("calibration target unreachable: {0}")]
    NoBracket(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("unknown figure `{0}` (expected fig3, fig4, fig5, fig6, fig7, fig7a or fig7b)")]
    UnknownFigure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI for its exit status.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } | Error::InvalidPath(_) | Error::EntropyDomain(_) => "parameter",
            Error::NoCollectionFilter { .. } | Error::UnknownOnu(_) => "model",
            Error::DecoyInfeasible { .. } => "infeasible",
            Error::Infeasible(_) => "infeasible",
            Error::NoBracket(_) => "calibration",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::UnknownFigure(_) => "usage",
            Error::Io(_) | Error::Csv(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
