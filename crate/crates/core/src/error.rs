use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; `path` points at the offending field.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("sensory graph is disconnected (algebraic connectivity {lambda2:.3e})")]
    Disconnected { lambda2: f64 },

    #[error("simulation diverged: agent {agent} became non-finite at t = {time:.4} s")]
    Diverged { agent: usize, time: f64 },

    #[error("estimator degenerate: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
