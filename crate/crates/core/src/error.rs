//! Crate-wide error type. Variants map onto the CLI exit-code contract:
//! input errors -> 2, rigging errors -> 3, numeric aborts -> 4, interface
//! mismatches -> 5.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: OBJ parse error: {message}")]
    ObjParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("bad input: {0}")]
    Input(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("rigging error: {0}")]
    Rigging(String),

    #[error("numeric abort at frame {frame}, substep {substep}: {message}")]
    Numeric {
        frame: usize,
        substep: usize,
        message: String,
    },

    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Rigging(_) => 3,
            Error::Numeric { .. } => 4,
            Error::InterfaceMismatch(_) => 5,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
