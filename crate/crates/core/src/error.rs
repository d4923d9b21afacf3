use thiserror::Error;

/// Errors raised by the library.
///
/// Verdicts such as "not concentrated" or an infeasible portfolio are not
/// errors; they are returned as ordinary values.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {expected}")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid scenario set: {0}")]
    Scenarios(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("invalid copula: {0}")]
    Copula(String),

    #[error("invalid risk functional: {0}")]
    Functional(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that a confidence level lies in the open unit interval.
pub(crate) fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "p",
            value: p,
            expected: "(0, 1)",
        })
    }
}
