use thiserror::Error;

/// Errors raised anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (bad thresholds, duplicate ids, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input failed a precondition check (shape mismatch, simplex violation, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The thresholded sensor graph has more than one connected component.
    #[error("disconnected graph: second-smallest Laplacian eigenvalue {lambda2:.3e} <= 1e-10")]
    DisconnectedGraph { lambda2: f64 },

    /// Malformed input data, with the 1-based line number when known.
    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    /// Sensors with zero variance over the training data.
    #[error("zero-variance sensors: {}", .0.join(", "))]
    ZeroVariance(Vec<String>),

    /// Sensor identifiers that do not match between two sources.
    #[error("sensor mismatch: {}", .0.join(", "))]
    SensorMismatch(Vec<String>),

    /// Log-evidence evaluated to a non-finite value.
    #[error("numerical overflow evaluating log-evidence at alpha={alpha:e}, gamma={gamma:e}")]
    NumericalOverflow { alpha: f64, gamma: f64 },

    /// A forecast would need a transition past the last trained slot.
    #[error("horizon exceeds day: slot {slot} + {horizon} steps needs an untrained transition (wrap disabled)")]
    HorizonExceedsDay { slot: usize, horizon: usize },

    /// Model container failed schema or payload checks.
    #[error("model format error: {0}")]
    ModelFormat(String),

    /// An error raised while processing one time slot.
    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_slot(self, slot: usize) -> Self {
        Error::Slot {
            slot,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
