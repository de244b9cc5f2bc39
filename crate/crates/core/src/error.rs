use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: parse error at line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("point ({x}, {y}) is outside the {what} extent")]
    OutOfExtent { what: &'static str, x: f64, y: f64 },

    #[error("nodata cell in the neighbourhood of ({x}, {y})")]
    NoData { x: f64, y: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("potential solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error("control limit violated: {bound} (value {value})")]
    Limit { bound: &'static str, value: f64 },

    #[error("MPC infeasible: {0}")]
    Infeasible(String),

    #[error("scenario error at `{path}`: {msg}")]
    Scenario { path: String, msg: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
