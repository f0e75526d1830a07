use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Both Jones amplitudes are zero; no message can be reconstructed.
    #[error("degenerate message: both polarization amplitudes are zero")]
    DegenerateMessage,

    /// Both candidate output intensities of a beam-splitter unit vanish.
    #[error("degenerate unit state: both output channels carry zero intensity")]
    DegenerateState,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
