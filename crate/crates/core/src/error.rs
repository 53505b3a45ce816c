use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scale guard: {0}")]
    ScaleGuard(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("end of adversarial context sequence at round {0}")]
    EndOfSequence(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
