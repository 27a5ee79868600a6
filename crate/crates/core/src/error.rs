use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid NACp {0}: must be in 0..=11")]
    InvalidNacp(i64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt input: {malformed} of {total} lines malformed (limit {limit_fraction})")]
    CorruptInput {
        malformed: usize,
        total: usize,
        limit_fraction: f64,
    },

    #[error("insufficient data: need at least {required}, got {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("invalid abscissa at index {index}: samples must be strictly increasing")]
    InvalidAbscissa { index: usize },

    #[error("t = {t} outside domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("smoothing failed after {iterations} iterations (last s = {last_s})")]
    SmoothingFailed {
        iterations: usize,
        last_s: f64,
        residual_sum_x: f64,
        residual_sum_y: f64,
    },

    #[error("no usable reports in track")]
    EmptyTrack,

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Stable snake_case label, used for skip reasons and diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidNacp(_) => "invalid_nacp",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) => "io",
            Error::CorruptInput { .. } => "corrupt-input",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InvalidAbscissa { .. } => "invalid_abscissa",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::SmoothingFailed { .. } => "smoothing_failed",
            Error::EmptyTrack => "empty_track",
            Error::Config(_) => "config",
        }
    }

    /// Whether the error stems from caller-supplied data or configuration.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidNacp(_) | Error::InvalidInput(_) | Error::Io(_) | Error::CorruptInput { .. } | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
