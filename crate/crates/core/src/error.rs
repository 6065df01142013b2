use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The building document does not match the schema. The message carries
    /// the line/column reported by the TOML parser.
    #[error("building config parse error: {0}")]
    Parse(String),

    #[error("invalid building: {0}")]
    Validation(String),

    #[error("weather data: {0}")]
    Weather(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("no plane-of-array irradiance for facade {facade} at tilt {tilt} deg")]
    MissingOrientation { facade: String, tilt: f64 },

    #[error("exchange matrix: {0}")]
    ExchangeMatrix(String),

    #[error("numerical degeneracy at cell ({row}, {col}): denominator {value}")]
    Degenerate { row: usize, col: usize, value: f64 },

    #[error("step {step}: not converged after {iterations} inner iterations (max delta {max_delta:.3e} K)")]
    NotConverged {
        step: usize,
        iterations: usize,
        max_delta: f64,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
