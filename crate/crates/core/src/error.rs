use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Fock truncation tail {tail:e} exceeds bound {bound:e} (n_max = {n_max})")]
    Truncation { tail: f64, bound: f64, n_max: usize },

    #[error("witness undefined: mean S0 is zero")]
    UndefinedWitness,

    #[error("too few pulses: need at least {needed}, got {got}")]
    TooFewPulses { needed: usize, got: usize },

    #[error("post-selection window contains no pulses")]
    EmptySelection,

    #[error("FWHM undefined: {0}")]
    UndefinedWidth(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("wavelength {0:e} m outside the supported range 0.4-1.1 um")]
    WavelengthOutOfRange(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status: 2 for configuration problems, 3 for numeric
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::WavelengthOutOfRange(_) => 2,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
