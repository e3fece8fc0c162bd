use thiserror::Error;

/// Errors raised anywhere in the mitigation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty experiment")]
    EmptyExperiment,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid register: {0}")]
    InvalidRegister(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("invalid calibration matrix: {0}")]
    InvalidCalibration(String),
    #[error("singular calibration matrix (condition number {condition_number:e})")]
    SingularCalibration { condition_number: f64 },
    #[error("more clusters than instances ({clusters} clusters, {instances} instances)")]
    MoreClustersThanInstances { clusters: usize, instances: usize },
    #[error("invalid fcm configuration: {0}")]
    InvalidFcmConfig(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid basis state label {0:?}")]
    InvalidBasisState(String),
    #[error("dataset order must match basis index order")]
    DatasetOrder,
    #[error("mitigation produced empty support")]
    EmptySupport,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("missing readout parameters for qubit {0}")]
    MissingQubitParams(String),
    #[error("coincident readout means for qubit {0}")]
    CoincidentMeans(String),
    #[error("invalid imported records: {0}")]
    Import(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid benchmark plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularCalibration { .. } | Error::EmptySupport)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
