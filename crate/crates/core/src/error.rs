use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The caller broke an operation's preconditions (bad index, wrong
    /// length, non-unitary matrix, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A protocol step found the register in a state it cannot act on,
    /// e.g. a photon mode that was not emptied.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("register of {requested} qubits exceeds the cap of {cap}")]
    Resource { requested: usize, cap: usize },

    /// The feedback loop ran out of rounds. `remaining` is the rotation
    /// angle still owed, in the caller's frame; call again with it to resume.
    #[error("rotation incomplete after {rounds} rounds, {remaining} rad remaining")]
    IncompleteRotation { remaining: f64, rounds: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
