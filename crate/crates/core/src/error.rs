use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid class proportions: {0}")]
    InvalidProportions(String),

    #[error("density ratio undefined: training probability of label {label} is zero")]
    UndefinedRatio { label: usize },

    #[error("insufficient data for class {class}: requested {requested}, pool holds {available}")]
    InsufficientData {
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("{variant} loss evaluated outside its domain at z = {z}")]
    Domain { variant: &'static str, z: f64 },

    #[error("degenerate binning: {0}")]
    DegenerateBinning(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("non-finite gradient from client {client_id} in round {round}")]
    NonFiniteGradient { client_id: usize, round: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}
